#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "contrafair/graph.hpp"
#include "contrafair/individual.hpp"

namespace contrafair {

// CSV with a header row. Reserved columns: `id` (required) and `time`
// (optional integer tick, 0 when absent). Every other column names a graph
// variable; categorical cells hold level labels, continuous cells decimals.
// Rows sharing an id become that individual's snapshots in time order. The
// outcome cell of the latest row is the individual's outcome; an empty outcome
// cell means no outcome.
std::vector<Individual> parse_dataset(std::istream& in, const CausalGraph& graph,
                                      const std::string& source = "<input>");
std::vector<Individual> load_dataset(const std::filesystem::path& path, const CausalGraph& graph);

// Inverse of parse_dataset. A `time` column is written when any snapshot tick
// is nonzero or any individual has more than one snapshot.
void write_dataset(std::ostream& out, const CausalGraph& graph, std::span<const Individual> individuals);
void save_dataset(const std::filesystem::path& path, const CausalGraph& graph,
                  std::span<const Individual> individuals);

}  // namespace contrafair
