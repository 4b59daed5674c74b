#include "alseg/checkpoint.h"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "alseg/errors.h"
#include "alseg/io.h"

namespace alseg {

std::string serialize_parameters(const ParameterSet& params) {
  std::string out = std::string(kCheckpointMagic) + "\n" + std::to_string(params.size()) + "\n";
  char buf[40];
  for (const auto& p : params) {
    const Matrix& w = p.tensor.value();
    out += p.name + " " + std::to_string(w.rows()) + " " + std::to_string(w.cols()) + "\n";
    for (Index r = 0; r < w.rows(); ++r) {
      for (Index c = 0; c < w.cols(); ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", w(r, c));
        if (c) out.push_back(' ');
        out += buf;
      }
      out.push_back('\n');
    }
  }
  return out;
}

void deserialize_parameters(const std::string& text, ParameterSet& params) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic) {
    throw FormatError("not an alseg checkpoint (bad header)");
  }
  std::size_t count = 0;
  if (!(in >> count) || count != params.size()) {
    throw FormatError("checkpoint has " + std::to_string(count) + " parameters, model has " +
                      std::to_string(params.size()));
  }
  for (auto& p : params) {
    std::string name;
    Index rows = 0, cols = 0;
    if (!(in >> name >> rows >> cols)) throw FormatError("truncated checkpoint");
    if (name != p.name || rows != p.tensor.rows() || cols != p.tensor.cols()) {
      throw FormatError("checkpoint parameter " + name + " (" + std::to_string(rows) + "x" +
                        std::to_string(cols) + ") does not match model parameter " + p.name);
    }
    Matrix& w = p.tensor.value();
    std::string tok;
    for (Index k = 0; k < w.size(); ++k) {
      if (!(in >> tok)) throw FormatError("truncated values for " + name);
      double v = 0;
      // strtod handles inf/nan spellings too.
      char* end = nullptr;
      v = std::strtod(tok.c_str(), &end);
      if (end != tok.c_str() + tok.size()) throw FormatError("bad number '" + tok + "'");
      w.data()[k] = v;
    }
  }
}

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params) {
  write_file_atomic(path, serialize_parameters(params));
}

void load_checkpoint(const std::filesystem::path& path, ParameterSet& params) {
  deserialize_parameters(read_file(path), params);
}

}  // namespace alseg
