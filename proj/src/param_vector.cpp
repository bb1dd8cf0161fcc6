#include "fedsim/param_vector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>

#include "fedsim/errors.hpp"

namespace fedsim {

ParamLayout::ParamLayout(std::vector<Segment> segments) : segments_(std::move(segments)) {
    if (segments_.empty()) throw UsageError("ParamLayout: needs at least one segment");
    offsets_.reserve(segments_.size());
    bool has_classifier = false;
    for (const auto& s : segments_) {
        if (s.name.empty()) throw UsageError("ParamLayout: empty segment name");
        if (s.length == 0) throw UsageError("ParamLayout: zero-length segment '" + s.name + "'");
        for (const auto& other : segments_) {
            if (&other != &s && other.name == s.name)
                throw UsageError("ParamLayout: duplicate segment name '" + s.name + "'");
        }
        if (s.role == SegmentRole::classifier) has_classifier = true;
        offsets_.push_back(total_len_);
        total_len_ += s.length;
    }
    if (!has_classifier)
        throw UsageError("ParamLayout: at least one segment must have the classifier role");
}

bool ParamLayout::has(std::string_view name) const {
    for (const auto& s : segments_)
        if (s.name == name) return true;
    return false;
}

const Segment& ParamLayout::segment(std::string_view name) const {
    for (const auto& s : segments_)
        if (s.name == name) return s;
    throw UsageError("ParamLayout: unknown segment '" + std::string(name) + "'");
}

std::size_t ParamLayout::offset_of(std::string_view name) const {
    for (std::size_t i = 0; i < segments_.size(); ++i)
        if (segments_[i].name == name) return offsets_[i];
    throw UsageError("ParamLayout: unknown segment '" + std::string(name) + "'");
}

bool operator==(const ParamLayout& a, const ParamLayout& b) {
    if (a.segments_.size() != b.segments_.size()) return false;
    for (std::size_t i = 0; i < a.segments_.size(); ++i) {
        const auto& x = a.segments_[i];
        const auto& y = b.segments_[i];
        if (x.name != y.name || x.length != y.length || x.role != y.role) return false;
    }
    return true;
}

ParamVector::ParamVector(LayoutPtr l, std::vector<double> v)
    : layout(std::move(l)), values(std::move(v)) {
    if (!layout) throw UsageError("ParamVector: null layout");
    if (values.size() != layout->total_len())
        throw UsageError("ParamVector: value count does not match layout length");
}

ParamVector ParamVector::zeros(LayoutPtr l) {
    if (!l) throw UsageError("ParamVector: null layout");
    std::vector<double> v(l->total_len(), 0.0);
    return ParamVector(std::move(l), std::move(v));
}

SegmentMask SegmentMask::all_of(const ParamLayout& layout) {
    std::vector<std::string> names;
    names.reserve(layout.segments().size());
    for (const auto& s : layout.segments()) names.push_back(s.name);
    return of(std::move(names));
}

SegmentMask SegmentMask::none() { return SegmentMask{}; }

SegmentMask SegmentMask::of(std::vector<std::string> names) {
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    return SegmentMask{std::move(names)};
}

bool SegmentMask::contains(std::string_view name) const {
    return std::binary_search(included.begin(), included.end(), name,
                              [](std::string_view a, std::string_view b) { return a < b; });
}

void SegmentMask::validate_for(const ParamLayout& layout) const {
    for (const auto& n : included)
        if (!layout.has(n)) throw UsageError("SegmentMask: unknown segment '" + n + "'");
}

bool same_layout(const ParamVector& a, const ParamVector& b) {
    if (a.layout == b.layout) return true;
    if (!a.layout || !b.layout) return false;
    return *a.layout == *b.layout;
}

void require_same_layout(const ParamVector& a, const ParamVector& b) {
    if (!same_layout(a, b)) throw UsageError("parameter vectors have mismatching layouts");
}

bool all_finite(const ParamVector& v) {
    for (double x : v.values)
        if (!std::isfinite(x)) return false;
    return true;
}

void require_finite(const ParamVector& v, const char* what) {
    if (!all_finite(v))
        throw NumericError(std::string("non-finite values in ") + what);
}

ParamVector axpy(double a, const ParamVector& x, const ParamVector& y) {
    require_same_layout(x, y);
    ParamVector out(x.layout, std::vector<double>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) out.values[i] = a * x.values[i] + y.values[i];
    require_finite(out, "axpy result");
    return out;
}

ParamVector weighted_mean(const std::vector<const ParamVector*>& vectors,
                          const std::vector<double>& weights) {
    if (vectors.empty()) throw UsageError("weighted_mean: empty vector list");
    if (vectors.size() != weights.size())
        throw UsageError("weighted_mean: weights count differs from vectors count");
    double wsum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw UsageError("weighted_mean: negative or NaN weight");
        wsum += w;
    }
    if (!(wsum > 0.0)) throw UsageError("weighted_mean: weights sum to zero");
    for (const auto* v : vectors) require_same_layout(*vectors.front(), *v);

    ParamVector out = ParamVector::zeros(vectors.front()->layout);
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        const double w = weights[i] / wsum;
        const auto& vals = vectors[i]->values;
        for (std::size_t j = 0; j < vals.size(); ++j) out.values[j] += w * vals[j];
    }
    require_finite(out, "weighted_mean result");
    return out;
}

ParamVector weighted_mean(const std::vector<ParamVector>& vectors,
                          const std::vector<double>& weights) {
    std::vector<const ParamVector*> ptrs;
    ptrs.reserve(vectors.size());
    for (const auto& v : vectors) ptrs.push_back(&v);
    return weighted_mean(ptrs, weights);
}

ParamVector masked_blend(const ParamVector& base, const ParamVector& overlay,
                         const SegmentMask& mask) {
    require_same_layout(base, overlay);
    mask.validate_for(*base.layout);
    ParamVector out = base;
    std::size_t offset = 0;
    for (const auto& seg : base.layout->segments()) {
        if (mask.contains(seg.name)) {
            std::copy(overlay.values.begin() + offset, overlay.values.begin() + offset + seg.length,
                      out.values.begin() + offset);
        }
        offset += seg.length;
    }
    return out;
}

ParamVector subtract(const ParamVector& a, const ParamVector& b) {
    require_same_layout(a, b);
    ParamVector out(a.layout, std::vector<double>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) out.values[i] = a.values[i] - b.values[i];
    return out;
}

void add_in_place(ParamVector& a, const ParamVector& b) {
    require_same_layout(a, b);
    for (std::size_t i = 0; i < a.size(); ++i) a.values[i] += b.values[i];
}

void sub_in_place(ParamVector& a, const ParamVector& b) {
    require_same_layout(a, b);
    for (std::size_t i = 0; i < a.size(); ++i) a.values[i] -= b.values[i];
}

void scale_in_place(ParamVector& a, double s) {
    for (double& x : a.values) x *= s;
}

double linf_norm(const ParamVector& v) {
    double m = 0.0;
    for (double x : v.values) m = std::max(m, std::abs(x));
    return m;
}

double linf_distance(const ParamVector& a, const ParamVector& b) {
    require_same_layout(a, b);
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
    return m;
}

bool exactly_equal(const ParamVector& a, const ParamVector& b) {
    if (!same_layout(a, b)) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.values[i] != b.values[i]) return false;
    return true;
}

namespace {

constexpr std::uint32_t kParamVectorMagic = 0x46505631; // "FPV1"

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError("param vector stream: truncated read");
    return v;
}

void write_string(std::ostream& os, const std::string& s) {
    write_pod<std::uint64_t>(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
    const auto n = read_pod<std::uint64_t>(is);
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) throw IoError("param vector stream: truncated string");
    return s;
}

} // namespace

void write_param_vector(std::ostream& os, const ParamVector& v) {
    if (!v.layout) throw UsageError("write_param_vector: vector without layout");
    write_pod(os, kParamVectorMagic);
    write_pod<std::uint64_t>(os, v.layout->segments().size());
    for (const auto& seg : v.layout->segments()) {
        write_string(os, seg.name);
        write_pod<std::uint64_t>(os, seg.length);
        write_pod<std::uint8_t>(os, seg.role == SegmentRole::classifier ? 1 : 0);
    }
    write_pod<std::uint64_t>(os, v.values.size());
    os.write(reinterpret_cast<const char*>(v.values.data()),
             static_cast<std::streamsize>(v.values.size() * sizeof(double)));
    if (!os) throw IoError("write_param_vector: stream write failed");
}

ParamVector read_param_vector(std::istream& is) {
    if (read_pod<std::uint32_t>(is) != kParamVectorMagic)
        throw IoError("read_param_vector: bad magic");
    const auto nseg = read_pod<std::uint64_t>(is);
    std::vector<Segment> segs;
    segs.reserve(nseg);
    for (std::uint64_t i = 0; i < nseg; ++i) {
        Segment s;
        s.name = read_string(is);
        s.length = read_pod<std::uint64_t>(is);
        s.role = read_pod<std::uint8_t>(is) ? SegmentRole::classifier
                                            : SegmentRole::feature_extractor;
        segs.push_back(std::move(s));
    }
    auto layout = std::make_shared<ParamLayout>(std::move(segs));
    const auto n = read_pod<std::uint64_t>(is);
    std::vector<double> values(n);
    is.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw IoError("read_param_vector: truncated values");
    return ParamVector(std::move(layout), std::move(values));
}

} // namespace fedsim
