#ifndef CONCEPTSEG_DATASET_IO_HPP
#define CONCEPTSEG_DATASET_IO_HPP

#include <string>
#include <vector>

#include <json.hpp>

#include "conceptseg/config.hpp"
#include "conceptseg/episode.hpp"

namespace conceptseg {

nlohmann::ordered_json episode_to_json(const Episode& e);
Episode episode_from_json(const nlohmann::json& j);

// One JSON document per episode plus a manifest with per-family counts.
// Serialization is byte-deterministic for a given dataset.
void write_dataset(const std::vector<Episode>& episodes, const std::string& dir,
                   const RunConfig& cfg);
std::vector<Episode> load_dataset(const std::string& dir);

}  // namespace conceptseg

#endif
