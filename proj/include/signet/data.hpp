#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "signet/common.hpp"
#include "signet/png_io.hpp"
#include "signet/rng.hpp"

namespace signet {

// ---------------------------------------------------------------------------
// Dataset model. Images are 3x32x32 rows in [-1,1] (CHW order); every record
// carries its sign class, real/fake provenance, and source id.
// ---------------------------------------------------------------------------

enum class Provenance : std::uint8_t { Real = 0, Fake = 1 };

struct ImageRecord {
    std::string class_label;
    Provenance provenance = Provenance::Real;
    std::vector<float> pixels;  // 3072 values in [-1, 1]
    std::string source_id;
};

inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::size_t kImagePixels = 3 * 32 * 32;

struct DatasetManifest {
    std::uint32_t version = kDatasetVersion;
    std::vector<ImageRecord> records;

    std::vector<std::string> class_names() const {
        std::vector<std::string> names;
        for (const auto& r : records)
            if (std::find(names.begin(), names.end(), r.class_label) == names.end())
                names.push_back(r.class_label);
        std::sort(names.begin(), names.end());
        return names;
    }

    std::map<std::string, std::pair<std::size_t, std::size_t>> class_counts() const {
        std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // real, fake
        for (const auto& r : records) {
            auto& c = counts[r.class_label];
            if (r.provenance == Provenance::Real)
                ++c.first;
            else
                ++c.second;
        }
        return counts;
    }
};

struct IngestStats {
    std::size_t decoded = 0;
    std::size_t skipped = 0;
};

// ---------------------------------------------------------------------------
// Ingestion: root/<class>/{real,fake}/*.png, stable ordering by path.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<float> to_chw_unit(const Rgb8Image& img) {
    std::vector<float> px(kImagePixels);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < 32; ++y)
            for (std::size_t x = 0; x < 32; ++x)
                px[c * 1024 + y * 32 + x] =
                    static_cast<float>(img.pixels[(y * 32 + x) * 3 + c]) / 127.5f - 1.0f;
    return px;
}

inline std::vector<std::filesystem::path> sorted_entries(const std::filesystem::path& dir,
                                                         bool dirs_only) {
    std::vector<std::filesystem::path> out;
    if (!std::filesystem::is_directory(dir)) return out;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (dirs_only && e.is_directory()) out.push_back(e.path());
        if (!dirs_only && e.is_regular_file()) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace detail

inline DatasetManifest ingest(const std::filesystem::path& root, IngestStats* stats = nullptr) {
    require(std::filesystem::is_directory(root), "ingest: " + root.string() + " is not a directory");
    DatasetManifest manifest;
    IngestStats local;
    auto class_dirs = detail::sorted_entries(root, /*dirs_only=*/true);
    require(!class_dirs.empty(), "ingest: no classes found under " + root.string());

    for (const auto& class_dir : class_dirs) {
        std::size_t class_records = 0;
        for (const char* sub : {"real", "fake"}) {
            for (const auto& file : detail::sorted_entries(class_dir / sub, /*dirs_only=*/false)) {
                if (file.extension() != ".png") continue;
                ImageRecord rec;
                rec.class_label = class_dir.filename().string();
                rec.provenance = std::strcmp(sub, "real") == 0 ? Provenance::Real : Provenance::Fake;
                rec.source_id = file.lexically_relative(root).generic_string();
                try {
                    Rgb8Image img = read_png_rgb8(file);
                    if (img.width != 32 || img.height != 32) img = resize_bilinear(img, 32, 32);
                    rec.pixels = detail::to_chw_unit(img);
                } catch (const std::exception& e) {
                    std::cerr << "ingest: skipping " << file.string() << ": " << e.what() << "\n";
                    ++local.skipped;
                    continue;
                }
                manifest.records.push_back(std::move(rec));
                ++local.decoded;
                ++class_records;
            }
        }
        require(class_records > 0,
                "ingest: class '" + class_dir.filename().string() + "' has no decodable images");
    }
    if (stats) *stats = local;
    return manifest;
}

// ---------------------------------------------------------------------------
// Balancing and splitting.
// ---------------------------------------------------------------------------

/// Per class, randomly undersamples the majority provenance down to the
/// minority count. Survivors keep their original order.
inline DatasetManifest balance(const DatasetManifest& manifest, std::uint64_t seed) {
    DatasetManifest out;
    out.version = manifest.version;
    auto classes = manifest.class_names();
    std::vector<char> keep(manifest.records.size(), 0);

    for (std::size_t ci = 0; ci < classes.size(); ++ci) {
        const auto& cls = classes[ci];
        std::vector<std::size_t> real_idx, fake_idx;
        for (std::size_t i = 0; i < manifest.records.size(); ++i) {
            if (manifest.records[i].class_label != cls) continue;
            (manifest.records[i].provenance == Provenance::Real ? real_idx : fake_idx).push_back(i);
        }
        require(!real_idx.empty() && !fake_idx.empty(),
                "balance: class '" + cls + "' lacks " + (real_idx.empty() ? "real" : "fake") + " images");
        std::size_t target = std::min(real_idx.size(), fake_idx.size());
        Rng rng = Rng(seed, 401).fork(ci);
        auto& majority = real_idx.size() > fake_idx.size() ? real_idx : fake_idx;
        rng.shuffle(majority);
        majority.resize(target);
        for (std::size_t i : real_idx) keep[i] = 1;
        for (std::size_t i : fake_idx) keep[i] = 1;
    }
    for (std::size_t i = 0; i < manifest.records.size(); ++i)
        if (keep[i]) out.records.push_back(manifest.records[i]);
    return out;
}

struct SplitSpec {
    double train_fraction = 0.6;
    double validation_fraction = 0.2;  // test takes the remainder
    std::uint64_t seed = 0;
};

struct SplitResult {
    DatasetManifest train, validation, test;
};

/// Stratified split: per class, shuffle and take floor(0.6 n) / floor(0.2 n)
/// / remainder. Classes below 5 images cannot fill three splits.
inline SplitResult split(const DatasetManifest& manifest, const SplitSpec& spec) {
    require(std::abs(spec.train_fraction + spec.validation_fraction - 0.8) < 1e-9,
            "split: fractions are pinned to 0.6/0.2/0.2");
    SplitResult out;
    auto classes = manifest.class_names();
    for (std::size_t ci = 0; ci < classes.size(); ++ci) {
        const auto& cls = classes[ci];
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < manifest.records.size(); ++i)
            if (manifest.records[i].class_label == cls) idx.push_back(i);
        require(idx.size() >= 5, "split: class '" + cls + "' has only " + std::to_string(idx.size()) +
                                     " images; a split would be empty");
        Rng rng = Rng(spec.seed, 419).fork(ci);
        rng.shuffle(idx);
        std::size_t n = idx.size();
        std::size_t n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(n)));
        std::size_t n_val = static_cast<std::size_t>(std::floor(spec.validation_fraction * static_cast<double>(n)));
        for (std::size_t i = 0; i < n; ++i) {
            const auto& rec = manifest.records[idx[i]];
            if (i < n_train)
                out.train.records.push_back(rec);
            else if (i < n_train + n_val)
                out.validation.records.push_back(rec);
            else
                out.test.records.push_back(rec);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic sign rendering: distinguishable archetypes (octagon, diamond,
// circle with glyph bars, ...) over randomized backgrounds with jitter and
// noise. Fake variants rotate the body color channels and invert the glyph,
// a fixed corruption family that keeps real-vs-fake learnable.
// ---------------------------------------------------------------------------

struct SignArchetype {
    std::string name;
    int shape = 0;        // 0 octagon, 1 diamond, 2 circle, 3 triangle, 4 square, 5 pentagon
    unsigned char r = 200, g = 30, b = 30;
    int glyph = 0;        // bar pattern id drawn inside the sign body
};

inline const std::vector<SignArchetype>& default_archetypes() {
    static const std::vector<SignArchetype> table = {
        {"octagon_red", 0, 200, 30, 30, 0},   {"diamond_yellow", 1, 230, 200, 40, 1},
        {"circle_25", 2, 240, 240, 235, 2},   {"circle_30", 2, 240, 240, 235, 3},
        {"circle_35", 2, 235, 235, 240, 4},   {"circle_45", 2, 240, 235, 235, 5},
        {"circle_55", 2, 235, 240, 240, 6},   {"triangle_warn", 3, 235, 120, 30, 7},
        {"square_blue", 4, 40, 80, 200, 8},   {"pentagon_green", 5, 40, 170, 80, 9},
        {"octagon_purple", 0, 140, 40, 180, 10}, {"diamond_teal", 1, 30, 170, 170, 11},
    };
    return table;
}

namespace detail {

inline bool inside_shape(int shape, double dx, double dy, double radius) {
    double ax = std::abs(dx), ay = std::abs(dy);
    switch (shape) {
        case 0:  // octagon
            return ax <= radius && ay <= radius && (ax + ay) <= 1.35 * radius;
        case 1:  // diamond
            return (ax + ay) <= 1.2 * radius;
        case 2:  // circle
            return dx * dx + dy * dy <= radius * radius;
        case 3:  // triangle (point up)
            return dy <= radius * 0.8 && dy >= -radius && ax <= (dy + radius) * 0.65;
        case 4:  // square
            return ax <= radius * 0.92 && ay <= radius * 0.92;
        default:  // pentagon approximated by circle-with-flat-bottom
            return dx * dx + dy * dy <= radius * radius && dy <= radius * 0.72;
    }
}

/// Glyph: a 5-bit horizontal bar code unique per pattern id, drawn in the
/// middle of the sign body.
inline bool glyph_pixel(int glyph, double dx, double dy, double radius) {
    if (std::abs(dx) > radius * 0.55 || std::abs(dy) > radius * 0.55) return false;
    int row = static_cast<int>(std::floor((dy + radius * 0.55) / (radius * 1.1 / 5.0)));
    row = std::clamp(row, 0, 4);
    unsigned bits = static_cast<unsigned>(glyph * 2654435761u) | 0x11u;  // nonzero pattern
    return ((bits >> row) & 1u) != 0;
}

inline Rgb8Image render_sign(const SignArchetype& arch, bool fake, Rng& rng) {
    Rgb8Image img;
    img.width = img.height = 32;
    img.pixels.assign(32 * 32 * 3, 0);

    // muted random background
    double bg_r = rng.uniform(60, 120), bg_g = rng.uniform(80, 140), bg_b = rng.uniform(60, 120);
    double cx = 15.5 + rng.uniform(-2.0, 2.0);
    double cy = 15.5 + rng.uniform(-2.0, 2.0);
    double radius = 11.0 * rng.uniform(0.9, 1.1);
    double jr = rng.uniform(-15.0, 15.0), jg = rng.uniform(-15.0, 15.0), jb = rng.uniform(-15.0, 15.0);

    double body_r = arch.r + jr, body_g = arch.g + jg, body_b = arch.b + jb;
    if (fake) {
        // fixed corruption family: rotate body color channels
        double t = body_r;
        body_r = body_g;
        body_g = body_b;
        body_b = t;
    }
    double glyph_lum = (body_r + body_g + body_b) / 3.0 > 128 ? 25.0 : 235.0;
    if (fake) glyph_lum = 255.0 - glyph_lum;  // and invert the glyph contrast

    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            double dx = x - cx, dy = y - cy;
            double r = bg_r, g = bg_g, b = bg_b;
            if (inside_shape(arch.shape, dx, dy, radius)) {
                r = body_r;
                g = body_g;
                b = body_b;
                if (glyph_pixel(arch.glyph, dx, dy, radius)) r = g = b = glyph_lum;
            }
            r += rng.uniform(-8.0, 8.0);
            g += rng.uniform(-8.0, 8.0);
            b += rng.uniform(-8.0, 8.0);
            std::size_t at = (static_cast<std::size_t>(y) * 32 + x) * 3;
            img.pixels[at + 0] = static_cast<unsigned char>(std::clamp(r, 0.0, 255.0));
            img.pixels[at + 1] = static_cast<unsigned char>(std::clamp(g, 0.0, 255.0));
            img.pixels[at + 2] = static_cast<unsigned char>(std::clamp(b, 0.0, 255.0));
        }
    return img;
}

}  // namespace detail

struct SynthConfig {
    std::vector<std::string> classes;  // names from default_archetypes()
    std::size_t per_class = 60;        // real images per class
    double fake_ratio = 0.9;           // fakes rendered per real, pre-balance
    std::uint64_t seed = 0;
};

/// Renders the ingest layout under out_dir. Byte-identical across runs for a
/// fixed seed.
inline void synth_signs(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
    require(cfg.per_class >= 1, "synth: per-class count must be at least 1");
    const auto& table = default_archetypes();
    std::vector<SignArchetype> chosen;
    for (const auto& name : cfg.classes) {
        bool found = false;
        for (const auto& a : table)
            if (a.name == name) {
                chosen.push_back(a);
                found = true;
            }
        require(found, "synth: unknown sign archetype '" + name + "'");
    }
    require(!chosen.empty(), "synth: no classes requested");

    std::filesystem::create_directories(out_dir);
    char name[32];
    for (std::size_t ci = 0; ci < chosen.size(); ++ci) {
        const auto& arch = chosen[ci];
        std::size_t n_fake = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(cfg.fake_ratio * static_cast<double>(cfg.per_class))));
        for (const char* sub : {"real", "fake"}) {
            bool fake = std::strcmp(sub, "fake") == 0;
            std::filesystem::create_directories(out_dir / arch.name / sub);
            std::size_t count = fake ? n_fake : cfg.per_class;
            for (std::size_t i = 0; i < count; ++i) {
                Rng rng = Rng(cfg.seed, 433).fork(ci * 100000 + (fake ? 50000 : 0) + i);
                Rgb8Image img = detail::render_sign(arch, fake, rng);
                std::snprintf(name, sizeof(name), "%04zu.png", i);
                write_png_rgb8(out_dir / arch.name / sub / name, img);
            }
        }
    }
}

/// First n archetype names, the default class list for synth runs.
inline std::vector<std::string> default_class_list(std::size_t n) {
    const auto& table = default_archetypes();
    require(n >= 1 && n <= table.size(),
            "synth: class count must be in [1," + std::to_string(table.size()) + "]");
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back(table[i].name);
    return names;
}

// ---------------------------------------------------------------------------
// Binary dataset file: versioned header, class table, record array with a
// little-endian single-precision pixel payload. Round-trips bit-exactly.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::ifstream& in, const std::string& what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    require(in.gcount() == 4, "dataset file: truncated while reading " + what + " at offset " +
                                  std::to_string(static_cast<long long>(in.tellg())));
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_string(std::ofstream& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::ifstream& in, const std::string& what) {
    std::uint32_t len = get_u32(in, what + " length");
    std::string s(len, '\0');
    in.read(s.data(), len);
    require(in.gcount() == static_cast<std::streamsize>(len),
            "dataset file: truncated while reading " + what);
    return s;
}

}  // namespace detail

inline constexpr char kDatasetMagic[4] = {'S', 'G', 'D', 'S'};

inline void save_tensors(const DatasetManifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "dataset file: cannot write " + path.string());
    out.write(kDatasetMagic, 4);
    detail::put_u32(out, manifest.version);

    auto classes = manifest.class_names();
    detail::put_u32(out, static_cast<std::uint32_t>(classes.size()));
    for (const auto& c : classes) detail::put_string(out, c);

    detail::put_u32(out, static_cast<std::uint32_t>(manifest.records.size()));
    for (const auto& r : manifest.records) {
        std::uint32_t class_idx = static_cast<std::uint32_t>(
            std::find(classes.begin(), classes.end(), r.class_label) - classes.begin());
        detail::put_u32(out, class_idx);
        detail::put_u32(out, static_cast<std::uint32_t>(r.provenance));
        detail::put_string(out, r.source_id);
        require(r.pixels.size() == kImagePixels, "dataset file: record '" + r.source_id +
                                                     "' has " + std::to_string(r.pixels.size()) +
                                                     " pixels, expected 3072");
        out.write(reinterpret_cast<const char*>(r.pixels.data()), kImagePixels * 4);
    }
    require(out.good(), "dataset file: write failed for " + path.string());
}

inline DatasetManifest load_tensors(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "dataset file: cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    require(in.gcount() == 4 && std::memcmp(magic, kDatasetMagic, 4) == 0,
            "dataset file: " + path.string() + " is not a dataset file");
    DatasetManifest manifest;
    manifest.version = detail::get_u32(in, "version");
    require(manifest.version == kDatasetVersion,
            "dataset file: version " + std::to_string(manifest.version) + " unsupported, expected " +
                std::to_string(kDatasetVersion));

    std::uint32_t n_classes = detail::get_u32(in, "class count");
    std::vector<std::string> classes;
    for (std::uint32_t i = 0; i < n_classes; ++i) classes.push_back(detail::get_string(in, "class name"));

    std::uint32_t n_records = detail::get_u32(in, "record count");
    manifest.records.reserve(n_records);
    for (std::uint32_t i = 0; i < n_records; ++i) {
        ImageRecord rec;
        std::uint32_t class_idx = detail::get_u32(in, "class index");
        require(class_idx < classes.size(), "dataset file: class index out of range in record " +
                                                std::to_string(i));
        rec.class_label = classes[class_idx];
        rec.provenance = static_cast<Provenance>(detail::get_u32(in, "provenance"));
        rec.source_id = detail::get_string(in, "source id");
        rec.pixels.resize(kImagePixels);
        in.read(reinterpret_cast<char*>(rec.pixels.data()), kImagePixels * 4);
        require(in.gcount() == static_cast<std::streamsize>(kImagePixels * 4),
                "dataset file: truncated pixel payload in record " + std::to_string(i) + " at offset " +
                    std::to_string(static_cast<long long>(in.tellg())));
        manifest.records.push_back(std::move(rec));
    }
    return manifest;
}

}  // namespace signet
