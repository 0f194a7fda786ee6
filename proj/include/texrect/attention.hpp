#pragma once

#include "texrect/common.hpp"
#include "texrect/image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace texrect {

// Row-major L×d feature rows.
struct FeatureMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<float> data;

    FeatureMatrix() = default;
    FeatureMatrix(int r, int c, float fill = 0.0f)
        : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

    float* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }
    const float* row(int i) const { return data.data() + static_cast<size_t>(i) * cols; }
    float& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
    float at(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }
};

// Key/value rows captured at one attention site. Head structure is preserved
// column-wise: width = heads * head_dim, head h occupies columns
// [h*head_dim, (h+1)*head_dim).
struct KVRecord {
    FeatureMatrix keys;
    FeatureMatrix values;
    int heads = 1;

    size_t bytes() const { return (keys.data.size() + values.data.size()) * sizeof(float); }
};

inline void check_kv(const KVRecord& kv, const std::string& what) {
    require(kv.keys.rows == kv.values.rows,
            what + ": key/value row count mismatch (" + std::to_string(kv.keys.rows) + " vs " +
                std::to_string(kv.values.rows) + ")");
    require(kv.keys.cols == kv.values.cols, what + ": key/value width mismatch");
    require(kv.heads >= 1 && kv.keys.cols % kv.heads == 0,
            what + ": width " + std::to_string(kv.keys.cols) + " not divisible by " +
                std::to_string(kv.heads) + " heads");
    require(all_finite(kv.keys.data) && all_finite(kv.values.data),
            what + ": non-finite feature values");
}

// Softmax(Q Kᵀ / sqrt(d)) V, softmax row-wise. Headless: callers with
// multi-head features apply it per head slice.
inline FeatureMatrix attend(const FeatureMatrix& q, const FeatureMatrix& k,
                            const FeatureMatrix& v) {
    require(k.rows >= 1, "attend: empty keys");
    require(q.cols == k.cols, "attend: query/key width mismatch (" + std::to_string(q.cols) +
                                  " vs " + std::to_string(k.cols) + ")");
    require(k.cols == v.cols, "attend: key/value width mismatch");
    require(k.rows == v.rows, "attend: key/value row count mismatch");

    float scale = 1.0f / std::sqrt(static_cast<float>(q.cols));
    FeatureMatrix out(q.rows, v.cols);
    std::vector<float> logits(static_cast<size_t>(k.rows));
    for (int i = 0; i < q.rows; ++i) {
        const float* qi = q.row(i);
        float max_logit = -std::numeric_limits<float>::infinity();
        for (int j = 0; j < k.rows; ++j) {
            const float* kj = k.row(j);
            float dot = 0.0f;
            for (int c = 0; c < q.cols; ++c) {
                dot += qi[c] * kj[c];
            }
            logits[static_cast<size_t>(j)] = dot * scale;
            max_logit = std::max(max_logit, logits[static_cast<size_t>(j)]);
        }
        float denom = 0.0f;
        for (int j = 0; j < k.rows; ++j) {
            logits[static_cast<size_t>(j)] = std::exp(logits[static_cast<size_t>(j)] - max_logit);
            denom += logits[static_cast<size_t>(j)];
        }
        float* oi = out.row(i);
        for (int j = 0; j < k.rows; ++j) {
            float wgt = logits[static_cast<size_t>(j)] / denom;
            const float* vj = v.row(j);
            for (int c = 0; c < v.cols; ++c) {
                oi[c] += wgt * vj[c];
            }
        }
    }
    return out;
}

// Stack key/value rows in list order (reference first, augmented copies after).
inline KVRecord concat_kv(std::span<const KVRecord> records) {
    require(!records.empty(), "concat_kv: empty record list");
    int width = records[0].keys.cols;
    int heads = records[0].heads;
    int total_rows = 0;
    for (const KVRecord& r : records) {
        require(r.keys.cols == width,
                "concat_kv: width mismatch (" + std::to_string(r.keys.cols) + " vs " +
                    std::to_string(width) + ")");
        require(r.heads == heads, "concat_kv: head count mismatch");
        require(r.keys.rows == r.values.rows, "concat_kv: malformed record");
        total_rows += r.keys.rows;
    }
    KVRecord out;
    out.heads = heads;
    out.keys = FeatureMatrix(total_rows, width);
    out.values = FeatureMatrix(total_rows, width);
    int at = 0;
    for (const KVRecord& r : records) {
        std::copy(r.keys.data.begin(), r.keys.data.end(), out.keys.row(at));
        std::copy(r.values.data.begin(), r.values.data.end(), out.values.row(at));
        at += r.keys.rows;
    }
    return out;
}

}  // namespace texrect
