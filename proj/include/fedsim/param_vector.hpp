#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace fedsim {

enum class SegmentRole { feature_extractor, classifier };

struct Segment {
    std::string name;
    std::size_t length = 0;
    SegmentRole role = SegmentRole::classifier;
};

// Named-segment layout of a flat parameter vector. Segment roles carry the
// feature-extractor / classifier split explicitly instead of inferring it
// from position.
class ParamLayout {
public:
    explicit ParamLayout(std::vector<Segment> segments);

    std::size_t total_len() const { return total_len_; }
    const std::vector<Segment>& segments() const { return segments_; }
    bool has(std::string_view name) const;
    const Segment& segment(std::string_view name) const;
    std::size_t offset_of(std::string_view name) const;

    friend bool operator==(const ParamLayout& a, const ParamLayout& b);

private:
    std::vector<Segment> segments_;
    std::vector<std::size_t> offsets_;
    std::size_t total_len_ = 0;
};

using LayoutPtr = std::shared_ptr<const ParamLayout>;

// Flat double-precision parameter vector bound to a layout. Values are plain
// storage; all operations on them are free functions that preserve finiteness.
struct ParamVector {
    LayoutPtr layout;
    std::vector<double> values;

    ParamVector() = default;
    ParamVector(LayoutPtr l, std::vector<double> v);

    static ParamVector zeros(LayoutPtr l);

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
    bool empty() const { return values.empty(); }
};

// Set of segment names a blend applies to.
struct SegmentMask {
    std::vector<std::string> included; // kept sorted, unique

    static SegmentMask all_of(const ParamLayout& layout);
    static SegmentMask none();
    static SegmentMask of(std::vector<std::string> names);

    bool contains(std::string_view name) const;
    bool empty() const { return included.empty(); }
    void validate_for(const ParamLayout& layout) const;
};

void require_same_layout(const ParamVector& a, const ParamVector& b);
bool same_layout(const ParamVector& a, const ParamVector& b);
bool all_finite(const ParamVector& v);
void require_finite(const ParamVector& v, const char* what);

// a*x + y, elementwise; inputs untouched.
ParamVector axpy(double a, const ParamVector& x, const ParamVector& y);

// Convex combination sum_i (w_i / sum w) * v_i, accumulated left to right in
// index order so results are reproducible bit for bit.
ParamVector weighted_mean(const std::vector<ParamVector>& vectors,
                          const std::vector<double>& weights);
ParamVector weighted_mean(const std::vector<const ParamVector*>& vectors,
                          const std::vector<double>& weights);

// Overlay's values on masked segments, base's elsewhere.
ParamVector masked_blend(const ParamVector& base, const ParamVector& overlay,
                         const SegmentMask& mask);

ParamVector subtract(const ParamVector& a, const ParamVector& b); // a - b
void add_in_place(ParamVector& a, const ParamVector& b);
void sub_in_place(ParamVector& a, const ParamVector& b);
void scale_in_place(ParamVector& a, double s);
double linf_norm(const ParamVector& v);
double linf_distance(const ParamVector& a, const ParamVector& b);
bool exactly_equal(const ParamVector& a, const ParamVector& b);

// Lossless binary dump of (layout descriptor, values); used for checkpoints.
void write_param_vector(std::ostream& os, const ParamVector& v);
ParamVector read_param_vector(std::istream& is);

} // namespace fedsim
