# cython: language_level=3, boundscheck=False, wraparound=False
# cython: cdivision=True, initializedcheck=False
"""Compiled per-sample SGD loop over a flattened network plan.

Mirrors the object-graph passes operation for operation (same formulas,
same accumulation order), so results are bit-identical to the pure
Python loop. Built without FP contraction for that reason.
"""

from libc.math cimport exp, log, tanh

cdef double PROB_CLAMP = 1e-12


cdef inline double _sigmoid(double z) noexcept nogil:
    cdef double e
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


cdef inline double _act(int kind, double z) noexcept nogil:
    if kind == 0:
        return z
    if kind == 1:
        return z if z > 0.0 else 0.0
    if kind == 2:
        return _sigmoid(z)
    return tanh(z)


cdef inline double _act_deriv(int kind, double z) noexcept nogil:
    cdef double s, t
    if kind == 0:
        return 1.0
    if kind == 1:
        return 1.0 if z > 0.0 else 0.0
    if kind == 2:
        s = _sigmoid(z)
        return s * (1.0 - s)
    t = tanh(z)
    return 1.0 - t * t


def sgd_epoch(const int[::1] layer_ptr, const int[::1] act,
              double[::1] bias,
              const int[::1] edge_ptr, const int[::1] edge_tgt,
              double[::1] edge_w,
              double[::1] actval, double[::1] pastsum, double[::1] delta,
              double[::1] sums,
              double[::1] z_out, double[::1] y_out, double[::1] exp_out,
              const double[:, ::1] X, const double[:, ::1] T,
              const int[::1] order,
              int head_code, int loss_code, double eta):
    """Run one epoch of per-sample SGD in the given order.

    Mutates bias, edge_w and the scratch arrays in place; returns the
    mean pre-step loss over the epoch.
    """
    cdef int n_layers = layer_ptr.shape[0] - 1
    cdef int n_samples = order.shape[0]
    cdef int n_out = layer_ptr[n_layers] - layer_ptr[n_layers - 1]
    cdef int out0 = layer_ptr[n_layers - 1]
    cdef int k, s, L, i, e, j, tgt, amax
    cdef double a, z, d, td, m, acc, total, loss, yv, tv, yc

    total = 0.0
    with nogil:
        for k in range(n_samples):
            s = order[k]

            # ---- forward ----
            for i in range(layer_ptr[0], layer_ptr[1]):
                actval[i] = X[s, i]
            for i in range(layer_ptr[0], layer_ptr[1]):
                a = actval[i]
                for e in range(edge_ptr[i], edge_ptr[i + 1]):
                    sums[edge_tgt[e]] += a * edge_w[e]

            for L in range(1, n_layers - 1):
                for i in range(layer_ptr[L], layer_ptr[L + 1]):
                    actval[i] = _act(act[i], sums[i] + bias[i])
                    pastsum[i] = sums[i]
                    a = actval[i]
                    for e in range(edge_ptr[i], edge_ptr[i + 1]):
                        sums[edge_tgt[e]] += a * edge_w[e]
                    sums[i] = 0.0

            for j in range(n_out):
                i = out0 + j
                pastsum[i] = sums[i]
                sums[i] = 0.0
                z_out[j] = pastsum[i] + bias[i]

            if head_code == 0:
                for j in range(n_out):
                    y_out[j] = z_out[j]
            elif head_code == 1:
                for j in range(n_out):
                    y_out[j] = _sigmoid(z_out[j])
            else:
                m = z_out[0]
                for j in range(n_out):
                    if z_out[j] > m:
                        m = z_out[j]
                acc = 0.0
                for j in range(n_out):
                    exp_out[j] = exp(z_out[j] - m)
                    acc += exp_out[j]
                for j in range(n_out):
                    y_out[j] = exp_out[j] / acc

            for j in range(n_out):
                actval[out0 + j] = y_out[j]

            # ---- pre-step loss ----
            if loss_code == 0:
                acc = 0.0
                for j in range(n_out):
                    d = y_out[j] - T[s, j]
                    acc += d * d
                loss = 0.5 * acc
            elif loss_code == 1:
                acc = 0.0
                for j in range(n_out):
                    tv = T[s, j]
                    if tv != 0.0:
                        acc += tv * log(y_out[j])
                loss = -acc
            else:
                acc = 0.0
                for j in range(n_out):
                    yc = y_out[j]
                    if yc < PROB_CLAMP:
                        yc = PROB_CLAMP
                    elif yc > 1.0 - PROB_CLAMP:
                        yc = 1.0 - PROB_CLAMP
                    tv = T[s, j]
                    acc += tv * log(yc) + (1.0 - tv) * log(1.0 - yc)
                loss = -acc
            total += loss

            # ---- backward ----
            for j in range(n_out):
                i = out0 + j
                yv = y_out[j]
                tv = T[s, j]
                if head_code == 1 and loss_code == 0:
                    d = (yv - tv) * yv * (1.0 - yv)
                else:
                    d = yv - tv
                delta[i] = d
                bias[i] -= eta * d

            for L in range(n_layers - 2, 0, -1):
                for i in range(layer_ptr[L], layer_ptr[L + 1]):
                    d = 0.0
                    a = actval[i]
                    for e in range(edge_ptr[i], edge_ptr[i + 1]):
                        td = delta[edge_tgt[e]]
                        d += td * edge_w[e]
                        edge_w[e] -= eta * td * a
                    d = d * _act_deriv(act[i], pastsum[i] + bias[i])
                    delta[i] = d
                    bias[i] -= eta * d

            for i in range(layer_ptr[0], layer_ptr[1]):
                a = actval[i]
                for e in range(edge_ptr[i], edge_ptr[i + 1]):
                    edge_w[e] -= eta * delta[edge_tgt[e]] * a

    return total / n_samples
