#pragma once

// Durable, labeled compasses with a moderation flag.
//
// One JSON document per record in a single directory, file name "<id>.json".
// Writes go to a temporary file that is fsynced and renamed over the target,
// so a crash leaves either the old or the new record. The directory is the
// index: list() rescans it, which also picks up edits made by another
// process (the offline `moderate` command).

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "latcompass/compass_engine.hpp"
#include "latcompass/json_io.hpp"

namespace latcompass {

enum class ModerationStatus { Pending, Approved, Rejected };

std::string_view status_name(ModerationStatus status);
// "pending" | "approved" | "rejected"; throws InvalidArgument otherwise.
ModerationStatus parse_status(std::string_view text);

inline constexpr std::size_t kMaxLabelLength = 200;  // code points

struct DirectionRecord {
  std::string id;
  std::string label;
  SpaceTag space = SpaceTag::z();
  std::vector<double> direction;
  double bias = 0.0;
  double step_unit = 0.0;
  double feature_scale = 1.0;
  double weight_norm = 1.0;
  int origin_category = 0;
  std::string generator_fingerprint;
  ModerationStatus status = ModerationStatus::Pending;
  std::string created_at;  // ISO-8601 UTC, microseconds
};

json record_to_json(const DirectionRecord& r);
// Throws InvalidArgument on a malformed document. A missing weight_norm
// reads as 1.0.
DirectionRecord record_from_json(const json& j);

struct LoadedCompass {
  CalibratedCompass compass;
  bool fingerprint_mismatch = false;
};

// Rebuilds a navigable compass, re-validating the unit norm and the step
// unit (InvalidArgument). The compass gets a fresh id.
LoadedCompass to_compass(const DirectionRecord& r, const std::string& active_fingerprint);

class DirectionStore {
 public:
  // Creates the directory if needed; StorageFailure if it is not writable.
  explicit DirectionStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const noexcept { return dir_; }

  // Trims the label. Errors: EmptyLabel, LabelTooLong, StorageFailure.
  DirectionRecord save(const CalibratedCompass& compass, std::string_view label, int origin_category,
                       const std::string& generator_fingerprint);

  // Newest first. Errors: StorageFailure.
  std::vector<DirectionRecord> list(std::optional<ModerationStatus> status = std::nullopt,
                                    std::optional<SpaceTag> space = std::nullopt) const;

  // Errors: UnknownRecord, StorageFailure.
  DirectionRecord get(const std::string& id) const;
  DirectionRecord set_moderation_status(const std::string& id, ModerationStatus status);

  // Writes the record document to `file`. Errors: UnknownRecord, StorageFailure.
  void export_record(const std::string& id, const std::filesystem::path& file) const;
  // Reads a record document and stores it under a new id with status Pending.
  // Errors: StorageFailure (unreadable file), InvalidArgument (bad document),
  // EmptyLabel, LabelTooLong.
  DirectionRecord import_record(const std::filesystem::path& file);

 private:
  std::filesystem::path path_for(const std::string& id) const;
  DirectionRecord read(const std::filesystem::path& file) const;
  void write(const DirectionRecord& r) const;
  std::string next_timestamp();

  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::int64_t last_created_us_ = 0;
};

}  // namespace latcompass
