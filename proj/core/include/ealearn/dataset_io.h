#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <string>

#include "ealearn/knowledge_graph.h"

namespace ealearn {

struct LoadedGraph {
  KnowledgeGraph graph;
  // Number of lines dropped because the same triple appeared earlier.
  std::size_t duplicates = 0;
};

// Reads a head<TAB>relation<TAB>tail file. Blank lines are skipped;
// vocabularies follow first-appearance order. Throws ParseError.
LoadedGraph load_graph(const std::filesystem::path& path);
LoadedGraph read_graph(std::istream& in, const std::string& source_name);

// Reads a left<TAB>right file against the pair's vocabularies. Returns a
// sorted, deduplicated pair set. Throws ParseError naming unknown entities.
PairSet load_alignments(const std::filesystem::path& path,
                        const KnowledgeGraphPair& pair);
PairSet read_alignments(std::istream& in, const std::string& source_name,
                        const KnowledgeGraphPair& pair);

void save_graph(const KnowledgeGraph& graph, const std::filesystem::path& path);
void save_alignments(const PairSet& pairs, const KnowledgeGraphPair& pair,
                     const std::filesystem::path& path);

}  // namespace ealearn
