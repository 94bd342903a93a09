#include "odml/sem2vec.hpp"

#include <fstream>
#include <sstream>

#include "odml/error.hpp"

namespace odml {

void SegMap::validate() const {
  if (n_sem == 0) throw ValidationError("SegMap: n_sem must be positive");
  if (cells.size() != height * width) {
    throw ValidationError("SegMap: " + std::to_string(cells.size()) + " cells for a " +
                          std::to_string(height) + "x" + std::to_string(width) + " grid");
  }
  for (std::size_t id : cells) {
    if (id >= n_sem) {
      throw ValidationError("SegMap: class id " + std::to_string(id) + " outside [0, " +
                            std::to_string(n_sem) + ")");
    }
  }
}

SemVector sem2vec(const SegMap& map) {
  map.validate();
  SemVector out;
  out.values.assign(map.n_sem, 0.0);
  for (std::size_t id : map.cells) out.values[id] = 1.0;
  return out;
}

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> toks;
  std::string t;
  while (ss >> t) toks.push_back(t);
  return toks;
}

std::size_t parse_count(const std::string& tok, const std::string& origin, std::size_t lineno,
                        const char* what) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(tok, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != tok.size() || tok.front() == '-') {
    throw ParseError(origin + ":" + std::to_string(lineno) + ": bad " + what + " '" + tok + "'");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

SegMap parse_segmap(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(origin + ": empty segmap file");
  auto header = tokenize(line);
  if (header.size() != 3) {
    throw ParseError(origin + ":1: header must be 'H W N_SEM', got '" + line + "'");
  }
  SegMap map;
  map.height = parse_count(header[0], origin, 1, "height");
  map.width = parse_count(header[1], origin, 1, "width");
  map.n_sem = parse_count(header[2], origin, 1, "class count");
  map.cells.reserve(map.height * map.width);

  std::size_t lineno = 1;
  for (std::size_t r = 0; r < map.height; ++r) {
    if (!std::getline(in, line)) {
      throw ParseError(origin + ": expected " + std::to_string(map.height) +
                       " rows, file ends after " + std::to_string(r));
    }
    ++lineno;
    auto toks = tokenize(line);
    if (toks.size() != map.width) {
      throw ParseError(origin + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(map.width) + " cells, got " + std::to_string(toks.size()));
    }
    for (const auto& tok : toks) {
      map.cells.push_back(parse_count(tok, origin, lineno, "class id"));
    }
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (!tokenize(line).empty()) {
      throw ParseError(origin + ":" + std::to_string(lineno) + ": trailing content after grid");
    }
  }
  try {
    map.validate();
  } catch (const ValidationError& e) {
    throw ParseError(origin + ": " + e.what());
  }
  return map;
}

SegMap load_segmap(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open segmap file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_segmap(buf.str(), path);
}

void save_segmap(const std::string& path, const SegMap& map) {
  map.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write segmap file '" + path + "'");
  out << map.height << ' ' << map.width << ' ' << map.n_sem << '\n';
  for (std::size_t r = 0; r < map.height; ++r) {
    for (std::size_t c = 0; c < map.width; ++c) {
      if (c) out << ' ';
      out << map.cells[r * map.width + c];
    }
    out << '\n';
  }
  if (!out.flush()) throw ParseError("failed writing segmap file '" + path + "'");
}

}  // namespace odml
