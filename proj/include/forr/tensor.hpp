#pragma once

#include <algorithm>
#include <complex>
#include <stdexcept>
#include <vector>

#include "forr/fwht.hpp"

namespace forr {

// Dense tensor with one wire per qudit id, all wires of equal dimension.
// quds are sorted ascending; quds[0] is the fastest-varying index digit.
struct LabeledTensor {
    std::vector<int> quds;
    int dim = 1;
    std::vector<cplx> data;

    static LabeledTensor scalar(int dim, cplx v = cplx(1)) {
        LabeledTensor t;
        t.dim = dim;
        t.data = {v};
        return t;
    }

    static LabeledTensor wire(int qud, int dim, std::vector<cplx> entries) {
        LabeledTensor t;
        t.dim = dim;
        t.quds = {qud};
        t.data = std::move(entries);
        return t;
    }

    size_t size() const { return data.size(); }
    int rank() const { return int(quds.size()); }

    int leg_pos(int qud) const {
        auto it = std::lower_bound(quds.begin(), quds.end(), qud);
        if (it == quds.end() || *it != qud) return -1;
        return int(it - quds.begin());
    }

    size_t stride(int pos) const {
        size_t s = 1;
        for (int i = 0; i < pos; ++i) s *= dim;
        return s;
    }
};

// Generalized contraction: legs in sum_quds (must be shared) are summed;
// other shared legs are matched entrywise; everything else tensors.
inline LabeledTensor gcontract(const LabeledTensor& x, const LabeledTensor& y,
                               const std::vector<int>& sum_quds) {
    const int dim = x.quds.empty() ? y.dim : x.dim;
    LabeledTensor out;
    out.dim = dim;
    std::vector<int> all;
    std::set_union(x.quds.begin(), x.quds.end(), y.quds.begin(), y.quds.end(),
                   std::back_inserter(all));
    for (int q : sum_quds)
        if (x.leg_pos(q) < 0 || y.leg_pos(q) < 0)
            throw std::invalid_argument("gcontract: summed leg must be shared");
    for (int q : all)
        if (!std::binary_search(sum_quds.begin(), sum_quds.end(), q)) out.quds.push_back(q);

    size_t out_size = 1;
    for (size_t i = 0; i < out.quds.size(); ++i) out_size *= dim;
    out.data.assign(out_size, cplx(0));

    // per-variable strides
    const int nv = int(all.size());
    std::vector<size_t> sx(nv, 0), sy(nv, 0), so(nv, 0);
    std::vector<char> summed(nv, 0);
    for (int i = 0; i < nv; ++i) {
        int q = all[i];
        int px = x.leg_pos(q), py = y.leg_pos(q), po = out.leg_pos(q);
        if (px >= 0) sx[i] = x.stride(px);
        if (py >= 0) sy[i] = y.stride(py);
        if (po >= 0) so[i] = out.stride(po);
        summed[i] = po < 0;
    }

    // odometer over the joint space
    std::vector<int> digit(nv, 0);
    size_t ix = 0, iy = 0, io = 0;
    size_t total = 1;
    for (int i = 0; i < nv; ++i) total *= dim;
    for (size_t step = 0;; ++step) {
        out.data[io] += x.data[ix] * y.data[iy];
        if (step + 1 == total) break;
        for (int i = 0; i < nv; ++i) {
            if (++digit[i] < dim) {
                ix += sx[i];
                iy += sy[i];
                io += so[i];
                break;
            }
            digit[i] = 0;
            ix -= sx[i] * (dim - 1);
            iy -= sy[i] * (dim - 1);
            io -= so[i] * (dim - 1);
        }
    }
    return out;
}

// entrywise scale of one leg by a vector
inline void scale_leg(LabeledTensor& t, int qud, const std::vector<cplx>& v) {
    int pos = t.leg_pos(qud);
    if (pos < 0) throw std::invalid_argument("scale_leg: no such leg");
    size_t s = t.stride(pos);
    for (size_t i = 0; i < t.data.size(); ++i) t.data[i] *= v[(i / s) % t.dim];
}

// entrywise multiply by a diagonal over a subset of legs (diag indexed with
// support[0] fastest)
inline void scale_legs(LabeledTensor& t, const std::vector<int>& support,
                       const std::vector<cplx>& diag) {
    if (support.empty()) {
        for (auto& z : t.data) z *= diag[0];
        return;
    }
    std::vector<size_t> strides(support.size());
    for (size_t k = 0; k < support.size(); ++k) {
        int pos = t.leg_pos(support[k]);
        if (pos < 0) throw std::invalid_argument("scale_legs: no such leg");
        strides[k] = t.stride(pos);
    }
    for (size_t i = 0; i < t.data.size(); ++i) {
        size_t di = 0, mul = 1;
        for (size_t k = 0; k < support.size(); ++k) {
            di += ((i / strides[k]) % t.dim) * mul;
            mul *= t.dim;
        }
        t.data[i] *= diag[di];
    }
}

// apply a dim x dim matrix (row-major) to one leg
inline void apply_matrix_leg(LabeledTensor& t, int qud, const std::vector<cplx>& m) {
    int pos = t.leg_pos(qud);
    if (pos < 0) throw std::invalid_argument("apply_matrix_leg: no such leg");
    const int dim = t.dim;
    size_t s = t.stride(pos);
    std::vector<cplx> col(dim);
    for (size_t base = 0; base < t.data.size(); ++base) {
        if ((base / s) % dim != 0) continue;
        for (int i = 0; i < dim; ++i) col[i] = t.data[base + s * i];
        for (int j = 0; j < dim; ++j) {
            cplx acc = 0;
            for (int i = 0; i < dim; ++i) acc += m[size_t(j) * dim + i] * col[i];
            t.data[base + s * j] = acc;
        }
    }
}

// contract one leg with a covector, removing it
inline LabeledTensor contract_leg(const LabeledTensor& t, int qud, const std::vector<cplx>& v) {
    return gcontract(t, LabeledTensor::wire(qud, t.dim, v), {qud});
}

}  // namespace forr
