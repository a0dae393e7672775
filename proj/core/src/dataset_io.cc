#include "ealearn/dataset_io.h"

#include <fstream>
#include <set>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "ealearn/error.h"

namespace ealearn {
namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t") == std::string_view::npos;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  return out;
}

}  // namespace

LoadedGraph read_graph(std::istream& in, const std::string& source_name) {
  Vocabulary entities;
  Vocabulary relations;
  std::vector<Triple> triples;
  std::set<Triple> seen;
  LoadedGraph out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = strip_cr(raw);
    if (is_blank(line)) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 3) {
      throw ParseError(source_name, line_no,
                       fmt::format("expected 3 tab-separated fields, got {}",
                                   fields.size()));
    }
    for (std::string_view f : fields) {
      if (f.empty()) throw ParseError(source_name, line_no, "empty field");
    }
    const Triple t{entities.intern(fields[0]), relations.intern(fields[1]),
                   entities.intern(fields[2])};
    if (!seen.insert(t).second) {
      ++out.duplicates;
      continue;
    }
    triples.push_back(t);
  }
  if (triples.empty()) throw ParseError(source_name, 0, "file has no triples");
  out.graph = KnowledgeGraph(std::move(entities), std::move(relations),
                             std::move(triples));
  return out;
}

LoadedGraph load_graph(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_graph(in, path.string());
}

PairSet read_alignments(std::istream& in, const std::string& source_name,
                        const KnowledgeGraphPair& pair) {
  PairSet out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = strip_cr(raw);
    if (is_blank(line)) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 2) {
      throw ParseError(source_name, line_no,
                       fmt::format("expected 2 tab-separated fields, got {}",
                                   fields.size()));
    }
    const auto left = pair.left.entities().find(fields[0]);
    if (!left) {
      throw ParseError(source_name, line_no,
                       fmt::format("unknown left entity '{}'", fields[0]));
    }
    const auto right = pair.right.entities().find(fields[1]);
    if (!right) {
      throw ParseError(source_name, line_no,
                       fmt::format("unknown right entity '{}'", fields[1]));
    }
    out.push_back({*left, *right});
  }
  normalize(out);
  return out;
}

PairSet load_alignments(const std::filesystem::path& path,
                        const KnowledgeGraphPair& pair) {
  auto in = open_input(path);
  return read_alignments(in, path.string(), pair);
}

void save_graph(const KnowledgeGraph& graph,
                const std::filesystem::path& path) {
  auto out = open_output(path);
  const auto& ent = graph.entities();
  const auto& rel = graph.relations();
  for (const Triple& t : graph.triples()) {
    out << ent.name(t.head) << '\t' << rel.name(t.relation) << '\t'
        << ent.name(t.tail) << '\n';
  }
}

void save_alignments(const PairSet& pairs, const KnowledgeGraphPair& pair,
                     const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const AlignmentPair& p : pairs) {
    out << pair.left.entities().name(p.left) << '\t'
        << pair.right.entities().name(p.right) << '\n';
  }
}

}  // namespace ealearn
