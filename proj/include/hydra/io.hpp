#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "hydra/config.hpp"
#include "hydra/data_model.hpp"
#include "hydra/error.hpp"
#include "hydra/hash.hpp"
#include "hydra/hydra_sketch.hpp"

namespace hydra {

inline constexpr char kSketchMagic[4] = {'H', 'Y', 'D', 'R'};
inline constexpr std::uint32_t kSketchVersion = 1;

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "sketch file format assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T get(std::string_view in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw_data("corrupt file: truncated");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

inline std::uint32_t crc32_of(std::string_view bytes) {
    return std::uint32_t(::crc32(0, reinterpret_cast<const Bytef*>(bytes.data()), uInt(bytes.size())));
}

}  // namespace detail

// Serialized size is a closed-form function of the configuration alone: heap
// blocks use k fixed-width slots (max_key_bytes capacity each), so files for
// one configuration are byte-identical in size regardless of stream content.
inline std::uint64_t serialized_size(const HydraConfig& cfg) {
    const std::uint64_t header = 4 + 4 + 2 + kHashFamilyId.size()  // magic, version, family
                                 + 7 * 4 + 8 + 5 * 8 + 2           // config block
                                 + 8;                              // total_updates
    const std::uint64_t heap_slot = 2 + cfg.max_key_bytes + 8;
    const std::uint64_t cell = 8 + 1 + std::uint64_t(cfg.L) * cfg.r_cs * cfg.w_cs * 8 +
                               std::uint64_t(cfg.L) * cfg.k * heap_slot;
    return header + std::uint64_t(cfg.r) * cfg.w * cell + 4;  // + crc
}

inline std::string serialize(const HydraSketch& hs) {
    const HydraConfig& cfg = hs.config();
    std::string out;
    out.reserve(serialized_size(cfg));
    out.append(kSketchMagic, 4);

    detail::put<std::uint32_t>(out, kSketchVersion);
    detail::put<std::uint16_t>(out, std::uint16_t(kHashFamilyId.size()));
    out.append(kHashFamilyId);

    detail::put<std::uint32_t>(out, cfg.r);
    detail::put<std::uint32_t>(out, cfg.w);
    detail::put<std::uint32_t>(out, cfg.r_cs);
    detail::put<std::uint32_t>(out, cfg.w_cs);
    detail::put<std::uint32_t>(out, cfg.L);
    detail::put<std::uint32_t>(out, cfg.k);
    detail::put<std::uint32_t>(out, cfg.max_key_bytes);
    detail::put<std::uint64_t>(out, cfg.stream_seed);
    detail::put<double>(out, cfg.eps);
    detail::put<double>(out, cfg.delta);
    detail::put<double>(out, cfg.eps_us);
    detail::put<double>(out, cfg.delta_us);
    detail::put<double>(out, cfg.gmin_ratio);
    detail::put<std::uint8_t>(out, hs.options().one_hash ? 1 : 0);
    detail::put<std::uint8_t>(out, hs.options().one_layer ? 1 : 0);
    detail::put<std::uint64_t>(out, hs.total_updates());

    for (std::uint32_t i = 0; i < cfg.r; i++) {
        for (std::uint32_t j = 0; j < cfg.w; j++) {
            const UniversalSketch& us = hs.cell(i, j);
            detail::put<std::uint64_t>(out, us.update_count());
            detail::put<std::uint8_t>(out, us.counters_complete() ? 1 : 0);
            for (std::uint32_t l = 0; l < cfg.L; l++) {
                const auto& counters = us.layers()[l].counters();
                out.append(reinterpret_cast<const char*>(counters.data()), counters.size() * 8);
            }
            for (std::uint32_t l = 0; l < cfg.L; l++) {
                std::vector<const HeapEntry*> entries;
                for (const auto& [key, e] : us.heap(l).entries()) entries.push_back(&e);
                std::sort(entries.begin(), entries.end(),
                          [](const HeapEntry* a, const HeapEntry* b) { return a->key < b->key; });
                for (std::uint32_t s = 0; s < cfg.k; s++) {
                    if (s < entries.size()) {
                        const HeapEntry& e = *entries[s];
                        if (e.key.size() > cfg.max_key_bytes)
                            throw_internal("heap key exceeds serialized slot capacity");
                        detail::put<std::uint16_t>(out, std::uint16_t(e.key.size()));
                        out.append(e.key);
                        out.append(cfg.max_key_bytes - e.key.size(), '\0');
                        detail::put<double>(out, e.estimate);
                    } else {
                        detail::put<std::uint16_t>(out, 0);
                        out.append(cfg.max_key_bytes, '\0');
                        detail::put<double>(out, 0.0);
                    }
                }
            }
        }
    }

    detail::put<std::uint32_t>(out, detail::crc32_of({out.data() + 4, out.size() - 4}));
    if (out.size() != serialized_size(cfg)) throw_internal("serialized size mismatch");
    return out;
}

inline HydraSketch deserialize(std::string_view bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kSketchMagic, 4) != 0)
        throw_data("corrupt file: bad magic");
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
    if (detail::crc32_of({bytes.data() + 4, bytes.size() - 8}) != stored_crc)
        throw_data("corrupt file: checksum mismatch");

    std::size_t pos = 4;
    if (detail::get<std::uint32_t>(bytes, pos) != kSketchVersion)
        throw_data("unsupported version");
    std::uint16_t famlen = detail::get<std::uint16_t>(bytes, pos);
    if (pos + famlen > bytes.size()) throw_data("corrupt file: truncated");
    std::string_view family = bytes.substr(pos, famlen);
    pos += famlen;
    if (family != kHashFamilyId) throw_data("hash family mismatch");

    HydraConfig cfg;
    cfg.r = detail::get<std::uint32_t>(bytes, pos);
    cfg.w = detail::get<std::uint32_t>(bytes, pos);
    cfg.r_cs = detail::get<std::uint32_t>(bytes, pos);
    cfg.w_cs = detail::get<std::uint32_t>(bytes, pos);
    cfg.L = detail::get<std::uint32_t>(bytes, pos);
    cfg.k = detail::get<std::uint32_t>(bytes, pos);
    cfg.max_key_bytes = detail::get<std::uint32_t>(bytes, pos);
    cfg.stream_seed = detail::get<std::uint64_t>(bytes, pos);
    cfg.eps = detail::get<double>(bytes, pos);
    cfg.delta = detail::get<double>(bytes, pos);
    cfg.eps_us = detail::get<double>(bytes, pos);
    cfg.delta_us = detail::get<double>(bytes, pos);
    cfg.gmin_ratio = detail::get<double>(bytes, pos);
    IngestOptions opts;
    opts.one_hash = detail::get<std::uint8_t>(bytes, pos) != 0;
    opts.one_layer = detail::get<std::uint8_t>(bytes, pos) != 0;
    std::uint64_t total_updates = detail::get<std::uint64_t>(bytes, pos);

    if (bytes.size() != serialized_size(cfg)) throw_data("corrupt file: size mismatch");

    HydraSketch hs(cfg, opts);
    hs.set_total_updates(total_updates);
    for (std::uint32_t i = 0; i < cfg.r; i++) {
        for (std::uint32_t j = 0; j < cfg.w; j++) {
            UniversalSketch& us = hs.cell(i, j);
            std::uint64_t update_count = detail::get<std::uint64_t>(bytes, pos);
            bool complete = detail::get<std::uint8_t>(bytes, pos) != 0;
            for (std::uint32_t l = 0; l < cfg.L; l++) {
                auto& counters = us.layers()[l].counters();
                std::memcpy(counters.data(), bytes.data() + pos, counters.size() * 8);
                pos += counters.size() * 8;
            }
            std::vector<std::vector<HeapEntry>> heap_entries(cfg.L);
            for (std::uint32_t l = 0; l < cfg.L; l++) {
                for (std::uint32_t s = 0; s < cfg.k; s++) {
                    std::uint16_t keylen = detail::get<std::uint16_t>(bytes, pos);
                    if (keylen > cfg.max_key_bytes) throw_data("corrupt file: bad key length");
                    std::string key(bytes.substr(pos, keylen));
                    pos += cfg.max_key_bytes;
                    double est = detail::get<double>(bytes, pos);
                    if (keylen > 0)
                        heap_entries[l].push_back(
                            {key, digest128(key, cfg.stream_seed), est});
                }
            }
            us.restore_state(update_count, complete, std::move(heap_entries));
        }
    }
    return hs;
}

inline void save_sketch(const HydraSketch& hs, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw_data("cannot open output file: " + path);
    std::string bytes = serialize(hs);
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw_data("write failed: " + path);
}

inline HydraSketch load_sketch(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_data("cannot open sketch file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize(ss.str());
}

// Human-readable plan report.
inline std::string describe(const HydraConfig& cfg) {
    ErrorBound bound = error_bound(cfg, 1.0 / cfg.gmin_ratio);
    std::ostringstream os;
    os << "grid:          r=" << cfg.r << " x w=" << cfg.w << "\n"
       << "cell:          L=" << cfg.L << " layers, count sketch " << cfg.r_cs << " x " << cfg.w_cs
       << ", heap k=" << cfg.k << "\n"
       << "counter budget M = w * w_cs = " << cfg.counter_budget() << "\n"
       << "targets:       eps=" << cfg.eps << " delta=" << cfg.delta << " eps_us=" << cfg.eps_us
       << " delta_us=" << cfg.delta_us << " gmin_ratio=" << cfg.gmin_ratio << "\n"
       << "bound at G_min: [" << bound.lower << ", " << bound.upper << "] with confidence "
       << bound.confidence << "\n"
       << "serialized size: " << serialized_size(cfg) << " bytes\n";
    return os.str();
}

// ---- CSV ingestion -------------------------------------------------------

struct IngestResult {
    HydraSketch sketch;
    std::uint64_t rows_ingested = 0;
    std::uint64_t rows_skipped = 0;
};

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

struct ColumnBinding {
    std::vector<std::size_t> dim_cols;
    std::size_t metric_col = 0;
    std::size_t field_count = 0;
};

inline ColumnBinding bind_schema(std::string_view header, const Schema& schema) {
    auto cols = split_csv_line(header);
    ColumnBinding b;
    b.field_count = cols.size();
    auto find = [&](const std::string& name) -> std::size_t {
        for (std::size_t i = 0; i < cols.size(); i++) {
            if (cols[i] == name) return i;
        }
        throw_data("schema mismatch: column not found: " + name);
    };
    for (const auto& d : schema.dimensions) b.dim_cols.push_back(find(d));
    b.metric_col = find(schema.metric);
    return b;
}

// Ingests [begin, end) of the file body (no header). Returns skipped count.
inline std::uint64_t ingest_lines(std::string_view body, const ColumnBinding& bind,
                                  const Schema& schema, HydraSketch& hs, std::uint64_t& rows) {
    std::uint64_t skipped = 0;
    std::size_t pos = 0;
    DataRecord rec;
    rec.dims.resize(bind.dim_cols.size());
    while (pos < body.size()) {
        std::size_t eol = body.find('\n', pos);
        std::string_view line = body.substr(pos, eol == std::string_view::npos ? eol : eol - pos);
        pos = eol == std::string_view::npos ? body.size() : eol + 1;
        if (line.empty()) continue;
        if (line.back() == '\r') line.remove_suffix(1);
        auto fields = split_csv_line(line);
        if (fields.size() != bind.field_count) {
            skipped++;
            continue;
        }
        for (std::size_t d = 0; d < bind.dim_cols.size(); d++) {
            std::string_view v = fields[bind.dim_cols[d]];
            rec.dims[d] = v.empty() ? schema.missing_token : std::string(v);
        }
        std::string_view m = fields[bind.metric_col];
        rec.metric = m.empty() ? schema.missing_token : std::string(m);
        hs.ingest(rec);
        rows++;
    }
    return skipped;
}

}  // namespace detail

// Balanced-binary-tree FULL merge of per-shard sketches.
inline HydraSketch tree_merge(std::vector<HydraSketch> shards, MergeMode mode = MergeMode::full) {
    if (shards.empty()) throw_usage("tree_merge: no shards");
    while (shards.size() > 1) {
        std::vector<HydraSketch> next;
        next.reserve((shards.size() + 1) / 2);
        for (std::size_t i = 0; i + 1 < shards.size(); i += 2) {
            shards[i].merge(shards[i + 1], mode);
            next.push_back(std::move(shards[i]));
        }
        if (shards.size() % 2 == 1) next.push_back(std::move(shards.back()));
        shards = std::move(next);
    }
    return std::move(shards[0]);
}

// Parses a CSV with header row, partitions the body into newline-snapped byte
// ranges, ingests each range into an independent sketch on its own thread and
// FULL-merges the shards as a balanced binary tree.
inline IngestResult ingest_csv(const std::string& path, const Schema& schema,
                               const HydraConfig& cfg, std::uint32_t shard_count,
                               const IngestOptions& opts = {}) {
    if (shard_count < 1) throw_usage("ingest: shards must be >= 1");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_data("cannot open input file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string content = ss.str();

    std::size_t header_end = content.find('\n');
    if (header_end == std::string::npos) throw_data("schema mismatch: missing header row");
    std::string_view header(content.data(), header_end);
    if (!header.empty() && header.back() == '\r') header.remove_suffix(1);
    auto bind = detail::bind_schema(header, schema);
    std::string_view body(content.data() + header_end + 1, content.size() - header_end - 1);

    // Newline-snapped shard boundaries.
    std::vector<std::string_view> chunks;
    std::size_t start = 0;
    for (std::uint32_t s = 0; s < shard_count && start < body.size(); s++) {
        std::size_t target = s + 1 == shard_count
                                 ? body.size()
                                 : std::min(body.size(), (body.size() * (s + 1)) / shard_count);
        std::size_t end = target >= body.size() ? body.size() : body.find('\n', target);
        end = end == std::string_view::npos ? body.size() : end + 1;
        if (end > start) chunks.push_back(body.substr(start, end - start));
        start = end;
    }
    if (chunks.empty()) chunks.push_back(body.substr(0, 0));

    std::vector<HydraSketch> shards;
    shards.reserve(chunks.size());
    for (std::size_t i = 0; i < chunks.size(); i++) shards.emplace_back(cfg, opts);
    std::vector<std::uint64_t> skipped(chunks.size(), 0);
    std::vector<std::uint64_t> rows(chunks.size(), 0);
    std::vector<std::exception_ptr> errors(chunks.size());

    {
        std::vector<std::jthread> workers;
        workers.reserve(chunks.size());
        for (std::size_t i = 0; i < chunks.size(); i++) {
            workers.emplace_back([&, i] {
                try {
                    skipped[i] = detail::ingest_lines(chunks[i], bind, schema, shards[i], rows[i]);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    IngestResult res{tree_merge(std::move(shards)), 0, 0};
    for (std::size_t i = 0; i < chunks.size(); i++) {
        res.rows_ingested += rows[i];
        res.rows_skipped += skipped[i];
    }
    return res;
}

}  // namespace hydra
