#include "parhom/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <stdexcept>

namespace parhom {

namespace {
// FFTW planning is not thread-safe; execution on distinct plans/buffers is.
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

TorusTransform::TorusTransform(std::vector<int> dims) : dims_(std::move(dims)) {
    if (dims_.empty()) throw std::invalid_argument("TorusTransform: empty dims");
    real_size_ = 1;
    for (int n : dims_) {
        if (n < 1) throw std::invalid_argument("TorusTransform: bad dim");
        real_size_ *= n;
    }
    spec_size_ = real_size_ / dims_.back() * (dims_.back() / 2 + 1);

    rbuf_ = fftw_alloc_real(static_cast<std::size_t>(real_size_));
    cbuf_ = reinterpret_cast<std::complex<double>*>(
        fftw_alloc_complex(static_cast<std::size_t>(spec_size_)));
    if (!rbuf_ || !cbuf_) throw std::bad_alloc();

    std::lock_guard<std::mutex> lock(plan_mutex());
    // FFTW_ESTIMATE keeps planning deterministic (required for bit-exact replays).
    plan_fwd_ = fftw_plan_dft_r2c(static_cast<int>(dims_.size()), dims_.data(), rbuf_,
                                  reinterpret_cast<fftw_complex*>(cbuf_), FFTW_ESTIMATE);
    plan_bwd_ = fftw_plan_dft_c2r(static_cast<int>(dims_.size()), dims_.data(),
                                  reinterpret_cast<fftw_complex*>(cbuf_), rbuf_, FFTW_ESTIMATE);
    if (!plan_fwd_ || !plan_bwd_) throw std::runtime_error("TorusTransform: planning failed");
}

TorusTransform::~TorusTransform() {
    std::lock_guard<std::mutex> lock(plan_mutex());
    if (plan_fwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
    if (plan_bwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_));
    fftw_free(rbuf_);
    fftw_free(cbuf_);
}

void TorusTransform::forward(const double* in, std::complex<double>* out) {
    for (std::int64_t i = 0; i < real_size_; ++i) rbuf_[i] = in[i];
    fftw_execute(static_cast<fftw_plan>(plan_fwd_));
    for (std::int64_t i = 0; i < spec_size_; ++i) out[i] = cbuf_[i];
}

void TorusTransform::backward(const std::complex<double>* in, double* out) {
    for (std::int64_t i = 0; i < spec_size_; ++i) cbuf_[i] = in[i];
    fftw_execute(static_cast<fftw_plan>(plan_bwd_));
    const double scale = 1.0 / static_cast<double>(real_size_);
    for (std::int64_t i = 0; i < real_size_; ++i) out[i] = rbuf_[i] * scale;
}

void TorusTransform::freq(std::int64_t flat, int* k) const {
    const int rank = static_cast<int>(dims_.size());
    const int last = dims_.back() / 2 + 1;
    for (int a = rank - 1; a >= 0; --a) {
        const int extent = (a == rank - 1) ? last : dims_[a];
        k[a] = static_cast<int>(flat % extent);
        flat /= extent;
    }
}

}  // namespace parhom
