#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace forr {

// Packed binary vector over F2.
struct BitVector {
    int len = 0;
    std::vector<uint64_t> words;

    BitVector() = default;
    explicit BitVector(int n) : len(n), words((n + 63) / 64, 0) {}

    static BitVector from_u64(int n, uint64_t bits) {
        BitVector v(n);
        if (n > 0) v.words[0] = (n >= 64) ? bits : (bits & ((uint64_t(1) << n) - 1));
        return v;
    }

    bool get(int i) const { return (words[i >> 6] >> (i & 63)) & 1; }
    void set(int i, bool b) {
        uint64_t m = uint64_t(1) << (i & 63);
        if (b) words[i >> 6] |= m; else words[i >> 6] &= ~m;
    }
    void flip(int i) { words[i >> 6] ^= uint64_t(1) << (i & 63); }

    void xor_with(const BitVector& o) {
        for (size_t w = 0; w < words.size(); ++w) words[w] ^= o.words[w];
    }

    // parity of the AND with another vector of the same length
    bool dot(const BitVector& o) const {
        uint64_t acc = 0;
        for (size_t w = 0; w < words.size(); ++w) acc ^= words[w] & o.words[w];
        return __builtin_parityll(acc);
    }

    int popcount() const {
        int s = 0;
        for (uint64_t w : words) s += __builtin_popcountll(w);
        return s;
    }

    // low 64 bits as an integer index (len <= 64)
    uint64_t as_u64() const { return words.empty() ? 0 : words[0]; }

    bool operator==(const BitVector& o) const { return len == o.len && words == o.words; }
    bool operator<(const BitVector& o) const { return words < o.words; }
};

// Packed binary matrix, row-major.
struct BitMatrix {
    int rows = 0, cols = 0;
    int wpr = 0;  // words per row
    std::vector<uint64_t> bits;

    BitMatrix() = default;
    BitMatrix(int r, int c) : rows(r), cols(c), wpr((c + 63) / 64), bits(size_t(r) * wpr, 0) {}

    static BitMatrix identity(int n) {
        BitMatrix m(n, n);
        for (int i = 0; i < n; ++i) m.set(i, i, true);
        return m;
    }

    bool get(int r, int c) const { return (bits[size_t(r) * wpr + (c >> 6)] >> (c & 63)) & 1; }
    void set(int r, int c, bool b) {
        uint64_t m = uint64_t(1) << (c & 63);
        size_t idx = size_t(r) * wpr + (c >> 6);
        if (b) bits[idx] |= m; else bits[idx] &= ~m;
    }

    BitVector row(int r) const {
        BitVector v(cols);
        for (int w = 0; w < wpr; ++w) v.words[w] = bits[size_t(r) * wpr + w];
        return v;
    }

    BitVector column(int c) const {
        BitVector v(rows);
        for (int r = 0; r < rows; ++r) if (get(r, c)) v.set(r, true);
        return v;
    }

    void xor_row_into(int src, int dst) {
        for (int w = 0; w < wpr; ++w) bits[size_t(dst) * wpr + w] ^= bits[size_t(src) * wpr + w];
    }
};

inline BitVector gf2_matvec(const BitMatrix& a, const BitVector& x) {
    if (a.cols != x.len) throw std::invalid_argument("gf2_matvec: dimension mismatch");
    BitVector y(a.rows);
    for (int r = 0; r < a.rows; ++r) {
        uint64_t acc = 0;
        for (int w = 0; w < a.wpr; ++w) acc ^= a.bits[size_t(r) * a.wpr + w] & x.words[w];
        if (__builtin_parityll(acc)) y.set(r, true);
    }
    return y;
}

inline BitMatrix gf2_transpose(const BitMatrix& a) {
    BitMatrix t(a.cols, a.rows);
    for (int r = 0; r < a.rows; ++r)
        for (int c = 0; c < a.cols; ++c)
            if (a.get(r, c)) t.set(c, r, true);
    return t;
}

inline BitMatrix gf2_matmul(const BitMatrix& a, const BitMatrix& b) {
    if (a.cols != b.rows) throw std::invalid_argument("gf2_matmul: dimension mismatch");
    BitMatrix c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int k = 0; k < a.cols; ++k)
            if (a.get(i, k))
                for (int w = 0; w < b.wpr; ++w)
                    c.bits[size_t(i) * c.wpr + w] ^= b.bits[size_t(k) * b.wpr + w];
    return c;
}

inline int gf2_rank(BitMatrix a) {
    int rank = 0;
    for (int c = 0; c < a.cols && rank < a.rows; ++c) {
        int pivot = -1;
        for (int r = rank; r < a.rows; ++r)
            if (a.get(r, c)) { pivot = r; break; }
        if (pivot < 0) continue;
        if (pivot != rank)
            for (int w = 0; w < a.wpr; ++w)
                std::swap(a.bits[size_t(pivot) * a.wpr + w], a.bits[size_t(rank) * a.wpr + w]);
        for (int r = 0; r < a.rows; ++r)
            if (r != rank && a.get(r, c)) a.xor_row_into(rank, r);
        ++rank;
    }
    return rank;
}

// Standard reflected binary Gray code over {0,1}^width.
// The initial all-zeros state counts as the first emitted string; advance()
// flips one bit per call and returns its position, or nullopt once all
// 2^width strings have been visited.
class GrayCode {
public:
    explicit GrayCode(int width) : width_(width), state_(width) {}

    const BitVector& state() const { return state_; }
    uint64_t state_u64() const { return state_.as_u64(); }
    uint64_t step() const { return step_; }

    std::optional<int> advance() {
        if (width_ >= 64) {
            if (step_ == ~uint64_t(0)) return std::nullopt;
        } else if (step_ + 1 >= (uint64_t(1) << width_)) {
            return std::nullopt;
        }
        ++step_;
        int pos = __builtin_ctzll(step_);
        state_.flip(pos);
        return pos;
    }

private:
    int width_;
    BitVector state_;
    uint64_t step_ = 0;
};

// Reflected ternary Gray code over {-1,0,+1}^width: one trit changes by +-1
// per step (loopless focus-pointer construction).
class TernaryGrayCode {
public:
    explicit TernaryGrayCode(int width)
        : width_(width), digits_(width, 0), dir_(width, 1), focus_(width + 1) {
        for (int i = 0; i <= width; ++i) focus_[i] = i;
    }

    // trits in {-1,0,+1}
    int trit(int i) const { return digits_[i] - 1; }
    const std::vector<int8_t>& digits() const { return digits_; }

    std::optional<int> advance() {
        int j = focus_[0];
        focus_[0] = 0;
        if (j == width_) return std::nullopt;
        digits_[j] += dir_[j];
        if (digits_[j] == 0 || digits_[j] == 2) {
            dir_[j] = -dir_[j];
            focus_[j] = focus_[j + 1];
            focus_[j + 1] = j + 1;
        }
        return j;
    }

private:
    int width_;
    std::vector<int8_t> digits_;
    std::vector<int8_t> dir_;
    std::vector<int> focus_;
};

}  // namespace forr
