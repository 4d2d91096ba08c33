# Compiled temporal-convolution kernels. Shapes and dtypes are validated by
# the dispatching wrapper in kernels.py; these loops assume contiguous
# float64 arrays and odd kernel length.

cimport cython


@cython.boundscheck(False)
@cython.wraparound(False)
def conv1d_forward(const double[:, :, ::1] x, const double[:, :, ::1] w,
                   const double[::1] b, double[:, :, ::1] out):
    cdef Py_ssize_t n_items = x.shape[0], T = x.shape[1], c_in = x.shape[2]
    cdef Py_ssize_t k = w.shape[0], c_out = w.shape[2]
    cdef Py_ssize_t pad = (k - 1) // 2
    cdef Py_ssize_t n, t, tap, src, ci, co
    cdef double xv
    with nogil:
        for n in range(n_items):
            for t in range(T):
                for co in range(c_out):
                    out[n, t, co] = b[co]
                for tap in range(k):
                    src = t + tap - pad
                    if src < 0 or src >= T:
                        continue
                    for ci in range(c_in):
                        xv = x[n, src, ci]
                        if xv == 0.0:
                            continue
                        for co in range(c_out):
                            out[n, t, co] += xv * w[tap, ci, co]


@cython.boundscheck(False)
@cython.wraparound(False)
def conv1d_backward(const double[:, :, ::1] x, const double[:, :, ::1] w,
                    const double[:, :, ::1] g, double[:, :, ::1] gx,
                    double[:, :, ::1] gw, double[::1] gb):
    cdef Py_ssize_t n_items = x.shape[0], T = x.shape[1], c_in = x.shape[2]
    cdef Py_ssize_t k = w.shape[0], c_out = w.shape[2]
    cdef Py_ssize_t pad = (k - 1) // 2
    cdef Py_ssize_t n, t, tap, src, ci, co
    cdef double xv, gv, acc
    with nogil:
        for n in range(n_items):
            for t in range(T):
                for co in range(c_out):
                    gb[co] += g[n, t, co]
                for tap in range(k):
                    src = t + tap - pad
                    if src < 0 or src >= T:
                        continue
                    for ci in range(c_in):
                        xv = x[n, src, ci]
                        acc = 0.0
                        for co in range(c_out):
                            gv = g[n, t, co]
                            gw[tap, ci, co] += xv * gv
                            acc += w[tap, ci, co] * gv
                        gx[n, src, ci] += acc
