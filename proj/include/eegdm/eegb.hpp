#ifndef EEGDM_EEGB_HPP
#define EEGDM_EEGB_HPP

#include <string>
#include <vector>

#include "eegdm/recording.hpp"

namespace eegdm {

// EEGB1 container: ASCII tag line "EEGB1", one line of JSON metadata
// (channel names, sampling rate, shape, dtype tag), then the raw payload as
// 32-bit little-endian IEEE floats in channel-major order.
void save_recording(const Recording& rec, const std::string& path);
Recording load_recording(const std::string& path);

// Label sidecar: CSV with columns (recording_id, subject_id, label).
void save_labels_csv(const std::vector<Recording>& recs, const std::string& path);

// Writes one .eegb per recording plus labels.csv into dir.
void save_dataset(const std::vector<Recording>& recs, const std::string& dir);

// Loads every *.eegb in dir; labels.csv, when present, overrides the
// per-file subject ids and labels.
std::vector<Recording> load_dataset(const std::string& dir);

}  // namespace eegdm

#endif
