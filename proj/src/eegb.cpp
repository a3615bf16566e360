#include "eegdm/eegb.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace eegdm {

static const char* kMagic = "EEGB1";

void save_recording(const Recording& rec, const std::string& path) {
    rec.validate();
    json meta;
    meta["id"] = rec.id;
    meta["subject_id"] = rec.subject_id;
    meta["sampling_rate"] = rec.sampling_rate;
    meta["shape"] = {rec.channels(), rec.duration()};
    meta["channel_names"] = rec.channel_names;
    if (rec.label)
        meta["label"] = *rec.label;
    else
        meta["label"] = nullptr;
    meta["dtype"] = "f32le";

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open file for writing: " + path);
    out << kMagic << "\n" << meta.dump() << "\n";
    // channel-major payload: channel 0's T values, then channel 1, ...
    for (int c = 0; c < rec.channels(); ++c) {
        for (int t = 0; t < rec.duration(); ++t) {
            float v = rec.data(c, t);
            out.write(reinterpret_cast<const char*>(&v), sizeof(float));
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

Recording load_recording(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);

    std::string magic, header;
    if (!std::getline(in, magic) || magic != kMagic) throw IoError("malformed header");
    if (!std::getline(in, header)) throw IoError("malformed header");

    json meta;
    try {
        meta = json::parse(header);
    } catch (const json::exception&) {
        throw IoError("malformed header");
    }

    Recording rec;
    int C = 0, T = 0;
    try {
        rec.id = meta.at("id").get<std::string>();
        rec.subject_id = meta.at("subject_id").get<std::string>();
        rec.sampling_rate = meta.at("sampling_rate").get<double>();
        C = meta.at("shape").at(0).get<int>();
        T = meta.at("shape").at(1).get<int>();
        rec.channel_names = meta.at("channel_names").get<std::vector<std::string>>();
        if (!meta.at("label").is_null()) rec.label = meta.at("label").get<int>();
        if (meta.at("dtype").get<std::string>() != "f32le") throw IoError("malformed header");
    } catch (const json::exception&) {
        throw IoError("malformed header");
    }
    if (C < 1 || T < 1) throw IoError("malformed header");
    if (!rec.channel_names.empty() && int(rec.channel_names.size()) != C)
        throw IoError("shape mismatch");

    std::vector<char> payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const size_t expected = size_t(4) * C * T;
    if (payload.size() != expected) {
        // A deficit of whole channels is a header/payload inconsistency; a
        // ragged byte count is a cut-off file.
        if (payload.size() < expected && (expected - payload.size()) % (size_t(4) * T) != 0)
            throw IoError("truncated payload");
        throw IoError("shape mismatch");
    }

    rec.data = MatF(C, T);
    size_t off = 0;
    for (int c = 0; c < C; ++c) {
        for (int t = 0; t < T; ++t) {
            float v;
            std::memcpy(&v, payload.data() + off, sizeof(float));
            rec.data(c, t) = v;
            off += sizeof(float);
        }
    }
    return rec;
}

void save_labels_csv(const std::vector<Recording>& recs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open file for writing: " + path);
    out << "recording_id,subject_id,label\n";
    for (const auto& r : recs) {
        out << r.id << "," << r.subject_id << ",";
        if (r.label) out << *r.label;
        out << "\n";
    }
}

void save_dataset(const std::vector<Recording>& recs, const std::string& dir) {
    fs::create_directories(dir);
    for (const auto& r : recs) save_recording(r, (fs::path(dir) / (r.id + ".eegb")).string());
    save_labels_csv(recs, (fs::path(dir) / "labels.csv").string());
}

std::vector<Recording> load_dataset(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);

    struct SidecarRow {
        std::string subject_id;
        std::optional<int> label;
    };
    std::map<std::string, SidecarRow> sidecar;
    fs::path labels = fs::path(dir) / "labels.csv";
    if (fs::exists(labels)) {
        std::ifstream in(labels.string());
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::stringstream ss(line);
            std::string id, subj, lab;
            std::getline(ss, id, ',');
            std::getline(ss, subj, ',');
            std::getline(ss, lab, ',');
            SidecarRow row;
            row.subject_id = subj;
            if (!lab.empty()) row.label = std::stoi(lab);
            sidecar[id] = row;
        }
    }

    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".eegb") files.push_back(e.path().string());
    std::sort(files.begin(), files.end());

    std::vector<Recording> out;
    for (const auto& f : files) {
        Recording rec = load_recording(f);
        auto it = sidecar.find(rec.id);
        if (it != sidecar.end()) {
            rec.subject_id = it->second.subject_id;
            rec.label = it->second.label;
        }
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace eegdm
