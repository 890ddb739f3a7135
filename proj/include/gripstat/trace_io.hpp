#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gripstat/plant_sim.hpp"

namespace gripstat {

// CSV body: t_s,current_A,position_rad,velocity_rpm,label
// label is blank when the trace carries no labels.
void write_trace_csv(const std::filesystem::path& path, const CurrentTrace& tr);
// Throws ParseError on malformed rows or a wrong header. Extra trailing
// columns (e.g. filter outputs) are ignored.
CurrentTrace read_trace_csv(const std::filesystem::path& path);

// Sidecar document: scenario, seed, sample rate and truth record.
std::string trace_metadata_json(const CurrentTrace& tr, const GraspScenario* sc);

// Writes <stem>.csv and <stem>.json. Returns the csv path.
std::filesystem::path save_trace(const std::filesystem::path& dir, const std::string& stem, const CurrentTrace& tr,
                                 const GraspScenario* sc = nullptr);
// Reads <csv> and, when present, the sibling .json truth record.
CurrentTrace load_trace(const std::filesystem::path& csv);

// Directory of traces plus dataset.json listing files and grid coordinates.
void save_dataset(const std::filesystem::path& dir, const std::vector<DatasetEntry>& entries, const DatasetGrid& grid);

struct DatasetRecord {
  std::filesystem::path file;
  std::size_t object_index = 0;
  std::size_t speed_index = 0;
  std::size_t repeat = 0;
  double contact_theta1 = 0.0;
  double motor_speed = 0.0;
  CurrentTrace trace;
};

std::vector<DatasetRecord> load_dataset(const std::filesystem::path& dir);

// Whole file as a string; throws Error naming the path.
std::string read_text_file(const std::filesystem::path& path);
// Write via a temporary sibling and rename.
void write_text_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace gripstat
