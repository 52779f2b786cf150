#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace parhom {

// Small dense vector for p / flux / gradient values, d <= 3.
struct VecN {
    std::array<double, 3> a{0.0, 0.0, 0.0};
    int d = 1;

    VecN() = default;
    explicit VecN(int dim) : d(dim) {}
    VecN(int dim, const double* src) : d(dim) {
        for (int i = 0; i < dim; ++i) a[i] = src[i];
    }
    static VecN axis(int dim, int i, double v = 1.0) {
        VecN out(dim);
        out.a[i] = v;
        return out;
    }

    double& operator[](int i) { return a[static_cast<std::size_t>(i)]; }
    double operator[](int i) const { return a[static_cast<std::size_t>(i)]; }
    const double* data() const { return a.data(); }
    double* data() { return a.data(); }

    VecN operator+(const VecN& o) const {
        VecN r(d);
        for (int i = 0; i < d; ++i) r.a[i] = a[i] + o.a[i];
        return r;
    }
    VecN operator-(const VecN& o) const {
        VecN r(d);
        for (int i = 0; i < d; ++i) r.a[i] = a[i] - o.a[i];
        return r;
    }
    VecN operator*(double s) const {
        VecN r(d);
        for (int i = 0; i < d; ++i) r.a[i] = a[i] * s;
        return r;
    }
    double dot(const VecN& o) const {
        double s = 0;
        for (int i = 0; i < d; ++i) s += a[i] * o.a[i];
        return s;
    }
    double norm() const { return std::sqrt(dot(*this)); }
};

}  // namespace parhom
