#pragma once

// City dataset CSV files plus a `.meta` key=value sidecar holding the
// generating profile. Column layout:
//   city,gnb_type,dx,dy,dz,state,p01_pl,p01_delay,p01_aoa_az,p01_aoa_el,
//   p01_aod_az,p01_aod_el,...,p20_aod_el

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fedchan/synth.hpp"

namespace fedchan::io {

inline constexpr std::size_t kDatasetColumns = 6 + synth::kPathDim;  // 126

std::vector<std::string> dataset_header();

void write_dataset_csv(std::ostream& out, const synth::CityDataset& dataset);
/// `source` names the stream in error messages.
std::vector<synth::LinkRecord> read_dataset_csv(std::istream& in, const std::string& source,
                                                std::string* city_out = nullptr);

std::string profile_to_meta(const synth::CityDataset& dataset);
/// Fills `dataset.profile`, `n_train` and `n_test` from sidecar text.
void apply_meta(const std::string& text, synth::CityDataset& dataset, const std::string& source);

std::filesystem::path meta_path(const std::filesystem::path& csv_path);

void write_dataset(const synth::CityDataset& dataset, const std::filesystem::path& csv_path);
synth::CityDataset read_dataset(const std::filesystem::path& csv_path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace fedchan::io
