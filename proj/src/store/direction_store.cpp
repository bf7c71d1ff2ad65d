#include "latcompass/direction_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "latcompass/encoding.hpp"
#include "latcompass/error.hpp"

namespace latcompass {
namespace fs = std::filesystem;

namespace {

[[noreturn]] void storage_failure(const std::string& what) {
  throw Error(ErrorCode::StorageFailure, what);
}

std::string trim(std::string_view s) {
  constexpr std::string_view ws = " \t\n\r\f\v";
  const auto first = s.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(ws);
  return std::string(s.substr(first, last - first + 1));
}

std::size_t code_points(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

std::string checked_label(std::string_view raw) {
  std::string label = trim(raw);
  if (label.empty()) throw Error(ErrorCode::EmptyLabel, "label is empty");
  if (code_points(label) > kMaxLabelLength) {
    throw Error(ErrorCode::LabelTooLong, "label exceeds " + std::to_string(kMaxLabelLength) + " characters");
  }
  return label;
}

// Record ids are tokens; anything else cannot name a file in the store.
bool plausible_id(const std::string& id) {
  return !id.empty() && id.size() <= 64 &&
         std::all_of(id.begin(), id.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-'; });
}

void write_all(int fd, const std::string& data, const fs::path& path) {
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      storage_failure("write " + path.string() + ": " + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
}

void atomic_write(const fs::path& target, const std::string& data) {
  const fs::path tmp = target.parent_path() / ("." + target.filename().string() + "." + make_token("tmp"));
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
  if (fd < 0) storage_failure("create " + tmp.string() + ": " + std::strerror(errno));
  try {
    write_all(fd, data, tmp);
    if (::fsync(fd) != 0) storage_failure("fsync " + tmp.string() + ": " + std::strerror(errno));
  } catch (...) {
    ::close(fd);
    ::unlink(tmp.c_str());
    throw;
  }
  ::close(fd);
  if (::rename(tmp.c_str(), target.c_str()) != 0) {
    const int err = errno;
    ::unlink(tmp.c_str());
    storage_failure("rename to " + target.string() + ": " + std::strerror(err));
  }
  const int dfd = ::open(target.parent_path().c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (dfd >= 0) {
    ::fsync(dfd);
    ::close(dfd);
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) storage_failure("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be positive");
}

}  // namespace

std::string_view status_name(ModerationStatus status) {
  switch (status) {
    case ModerationStatus::Pending: return "pending";
    case ModerationStatus::Approved: return "approved";
    case ModerationStatus::Rejected: return "rejected";
  }
  return "pending";
}

ModerationStatus parse_status(std::string_view text) {
  if (text == "pending") return ModerationStatus::Pending;
  if (text == "approved") return ModerationStatus::Approved;
  if (text == "rejected") return ModerationStatus::Rejected;
  throw Error(ErrorCode::InvalidArgument, "status must be pending, approved or rejected");
}

json record_to_json(const DirectionRecord& r) {
  return json{{"id", r.id},
              {"label", r.label},
              {"space", r.space.to_string()},
              {"direction", r.direction},
              {"bias", r.bias},
              {"step_unit", r.step_unit},
              {"feature_scale", r.feature_scale},
              {"weight_norm", r.weight_norm},
              {"origin_category", r.origin_category},
              {"generator_fingerprint", r.generator_fingerprint},
              {"moderation_status", std::string(status_name(r.status))},
              {"created_at", r.created_at}};
}

DirectionRecord record_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "record must be a JSON object");
  DirectionRecord r;
  r.id = require_string(j, "id");
  r.label = require_string(j, "label");
  r.space = SpaceTag::parse(require_string(j, "space"));
  r.direction = doubles_from_json(require_field(j, "direction"));
  r.bias = require_number(j, "bias");
  r.step_unit = require_number(j, "step_unit");
  r.feature_scale = require_number(j, "feature_scale");
  r.weight_norm = j.contains("weight_norm") ? require_number(j, "weight_norm") : 1.0;
  r.origin_category = static_cast<int>(require_int(j, "origin_category"));
  r.generator_fingerprint = require_string(j, "generator_fingerprint");
  r.status = parse_status(require_string(j, "moderation_status"));
  r.created_at = require_string(j, "created_at");
  return r;
}

LoadedCompass to_compass(const DirectionRecord& r, const std::string& active_fingerprint) {
  require_positive(r.step_unit, "step_unit");
  require_positive(r.feature_scale, "feature_scale");
  require_positive(r.weight_norm, "weight_norm");
  if (!std::isfinite(r.bias)) throw Error(ErrorCode::NonFinite, "bias is not finite");
  LoadedCompass out{
      CalibratedCompass{make_token("cmp"), Direction::from_unit(r.direction, r.space), r.bias, r.weight_norm,
                        TraversalStepSize(r.step_unit), r.space, r.feature_scale, "record:" + r.id,
                        r.origin_category, TrainingStats{}},
      r.generator_fingerprint != active_fingerprint,
  };
  return out;
}

DirectionStore::DirectionStore(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec || !fs::is_directory(dir_)) storage_failure("cannot create data directory " + dir_.string());
  if (::access(dir_.c_str(), W_OK) != 0) storage_failure("data directory " + dir_.string() + " is not writable");
}

fs::path DirectionStore::path_for(const std::string& id) const { return dir_ / (id + ".json"); }

DirectionRecord DirectionStore::read(const fs::path& file) const {
  try {
    return record_from_json(json::parse(read_file(file)));
  } catch (const json::exception& e) {
    storage_failure("corrupt record " + file.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::StorageFailure) throw;
    storage_failure("corrupt record " + file.string() + ": " + e.what());
  }
}

void DirectionStore::write(const DirectionRecord& r) const { atomic_write(path_for(r.id), record_to_json(r).dump(2)); }

std::string DirectionStore::next_timestamp() {
  using namespace std::chrono;
  std::int64_t now = duration_cast<microseconds>(system_clock::now().time_since_epoch()).count();
  now = std::max(now, last_created_us_ + 1);
  last_created_us_ = now;
  return iso8601(system_clock::time_point(duration_cast<system_clock::duration>(microseconds(now))));
}

DirectionRecord DirectionStore::save(const CalibratedCompass& compass, std::string_view label, int origin_category,
                                     const std::string& generator_fingerprint) {
  DirectionRecord r;
  r.label = checked_label(label);
  r.space = compass.space;
  r.direction.assign(compass.direction.values().begin(), compass.direction.values().end());
  r.bias = compass.bias;
  r.step_unit = compass.step_unit.magnitude();
  r.feature_scale = compass.feature_scale;
  r.weight_norm = compass.weight_norm;
  r.origin_category = origin_category;
  r.generator_fingerprint = generator_fingerprint;
  r.status = ModerationStatus::Pending;

  std::lock_guard lock(mu_);
  r.id = make_token("dir");
  r.created_at = next_timestamp();
  write(r);
  return r;
}

std::vector<DirectionRecord> DirectionStore::list(std::optional<ModerationStatus> status,
                                                  std::optional<SpaceTag> space) const {
  std::vector<DirectionRecord> out;
  std::error_code ec;
  fs::directory_iterator it(dir_, ec);
  if (ec) storage_failure("cannot scan " + dir_.string() + ": " + ec.message());
  for (const auto& entry : it) {
    const auto name = entry.path().filename().string();
    if (name.empty() || name.front() == '.' || entry.path().extension() != ".json") continue;
    DirectionRecord r;
    try {
      r = read(entry.path());
    } catch (const Error&) {
      // Vanished between the scan and the read, or not ours.
      continue;
    }
    if (status && r.status != *status) continue;
    if (space && !(r.space == *space)) continue;
    out.push_back(std::move(r));
  }
  std::sort(out.begin(), out.end(), [](const DirectionRecord& a, const DirectionRecord& b) {
    if (a.created_at != b.created_at) return a.created_at > b.created_at;
    return a.id > b.id;
  });
  return out;
}

DirectionRecord DirectionStore::get(const std::string& id) const {
  if (!plausible_id(id)) throw Error(ErrorCode::UnknownRecord, "no direction record " + id);
  const fs::path p = path_for(id);
  if (!fs::exists(p)) throw Error(ErrorCode::UnknownRecord, "no direction record " + id);
  return read(p);
}

DirectionRecord DirectionStore::set_moderation_status(const std::string& id, ModerationStatus status) {
  std::lock_guard lock(mu_);
  DirectionRecord r = get(id);
  r.status = status;
  write(r);
  return r;
}

void DirectionStore::export_record(const std::string& id, const fs::path& file) const {
  const DirectionRecord r = get(id);
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) storage_failure("cannot write " + file.string());
  out << record_to_json(r).dump(2) << '\n';
  if (!out) storage_failure("cannot write " + file.string());
}

DirectionRecord DirectionStore::import_record(const fs::path& file) {
  json doc;
  try {
    doc = json::parse(read_file(file));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, "not a record document: " + std::string(e.what()));
  }
  DirectionRecord r = record_from_json(doc);
  r.label = checked_label(r.label);
  // Reject documents that could not be navigated later.
  to_compass(r, r.generator_fingerprint);
  r.status = ModerationStatus::Pending;

  std::lock_guard lock(mu_);
  r.id = make_token("dir");
  r.created_at = next_timestamp();
  write(r);
  return r;
}

}  // namespace latcompass
