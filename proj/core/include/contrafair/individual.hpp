#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace contrafair {

// Variable name -> stored value (level index for categorical variables).
using ValueMap = std::map<std::string, double, std::less<>>;

struct Snapshot {
  std::int64_t time = 0;
  ValueMap observables;

  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

struct Individual {
  std::string id;
  ValueMap protected_values;
  std::vector<Snapshot> snapshots;
  std::optional<double> outcome;

  // Index of the snapshot with tick `time`, or nullopt.
  std::optional<std::size_t> snapshot_at(std::int64_t time) const;
  // The snapshot paired with the observed outcome (the latest one).
  std::size_t label_snapshot() const noexcept {
    return snapshots.empty() ? 0 : snapshots.size() - 1;
  }
};

// Abducted noise terms, one per feature equation. Invariant across worlds.
struct LatentAssignment {
  ValueMap residuals;
};

// do(A <- a) over protected variables only.
struct Intervention {
  ValueMap assignments;

  friend bool operator==(const Intervention&, const Intervention&) = default;
};

// Everything a predictor may read about one individual in one world.
struct World {
  ValueMap protected_values;
  ValueMap observables;
  LatentAssignment latent;
};

}  // namespace contrafair
