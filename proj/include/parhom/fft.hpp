#pragma once

#include <complex>
#include <cstdint>
#include <vector>

namespace parhom {

// Real <-> half-complex FFT on an arbitrary-rank box, wrapping FFTW.
// One instance owns its plans and buffers; instances may run concurrently,
// plan creation is serialized internally.
class TorusTransform {
  public:
    explicit TorusTransform(std::vector<int> dims);
    ~TorusTransform();
    TorusTransform(const TorusTransform&) = delete;
    TorusTransform& operator=(const TorusTransform&) = delete;

    // in: real_size() doubles -> out: spec_size() complex entries.
    void forward(const double* in, std::complex<double>* out);
    // Inverse transform including the 1/N normalization.
    void backward(const std::complex<double>* in, double* out);

    std::int64_t real_size() const { return real_size_; }
    std::int64_t spec_size() const { return spec_size_; }
    const std::vector<int>& dims() const { return dims_; }

    // Integer frequency along each axis for a flat spectral index
    // (last axis runs over 0..n/2 only).
    void freq(std::int64_t flat, int* k) const;

  private:
    std::vector<int> dims_;
    std::int64_t real_size_ = 0;
    std::int64_t spec_size_ = 0;
    void* plan_fwd_ = nullptr;
    void* plan_bwd_ = nullptr;
    double* rbuf_ = nullptr;
    std::complex<double>* cbuf_ = nullptr;
};

}  // namespace parhom
