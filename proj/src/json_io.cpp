#include "contrastner/json_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <system_error>

#include "contrastner/error.hpp"

namespace contrastner {
namespace {

void format_double(double x, std::string& out) {
  if (!std::isfinite(x)) throw NumericError("cannot serialize a non-finite number to JSON");
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  std::string_view s(buf, static_cast<std::size_t>(res.ptr - buf));
  out += s;
  if (s.find_first_of(".e") == std::string_view::npos) out += ".0";
}

void dump_into(const OrderedJson& v, std::string& out) {
  switch (v.type()) {
    case OrderedJson::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out += ", ";
        first = false;
        out += OrderedJson(it.key()).dump();
        out += ": ";
        dump_into(it.value(), out);
      }
      out += '}';
      break;
    }
    case OrderedJson::value_t::array: {
      out += '[';
      bool first = true;
      for (const auto& item : v) {
        if (!first) out += ", ";
        first = false;
        dump_into(item, out);
      }
      out += ']';
      break;
    }
    case OrderedJson::value_t::number_float:
      format_double(v.get<double>(), out);
      break;
    default:
      out += v.dump();
      break;
  }
}

}  // namespace

std::string dump_json(const OrderedJson& value) {
  std::string out;
  dump_into(value, out);
  return out;
}

OrderedJson parse_json(std::string_view text, const std::string& context) {
  try {
    return OrderedJson::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(context + ": malformed JSON (" + e.what() + ")");
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file_atomic(const std::string& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write file: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error("failed writing file: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error("cannot move " + tmp.string() + " into place at " + path);
  }
}

}  // namespace contrastner
