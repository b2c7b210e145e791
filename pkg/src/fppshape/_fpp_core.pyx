# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled growth kernel. Mirrors ``_fpp_py.grow`` exactly."""

import numpy as np
from libc.stdlib cimport malloc, realloc, free, calloc


cdef struct Event:
    double t
    int x
    int y


cdef inline bint ev_less(Event* a, Event* b) noexcept nogil:
    if a.t != b.t:
        return a.t < b.t
    if a.x != b.x:
        return a.x < b.x
    return a.y < b.y


cdef class _Heap:
    cdef Event* data
    cdef Py_ssize_t size
    cdef Py_ssize_t cap

    def __cinit__(self):
        self.cap = 1024
        self.size = 0
        self.data = <Event*> malloc(self.cap * sizeof(Event))
        if self.data == NULL:
            raise MemoryError()

    def __dealloc__(self):
        free(self.data)

    cdef int push(self, double t, int x, int y) except -1:
        cdef Py_ssize_t i, parent
        cdef Event ev
        cdef Event* grown
        if self.size == self.cap:
            grown = <Event*> realloc(self.data, 2 * self.cap * sizeof(Event))
            if grown == NULL:
                raise MemoryError()
            self.data = grown
            self.cap *= 2
        ev.t = t
        ev.x = x
        ev.y = y
        i = self.size
        self.size += 1
        while i > 0:
            parent = (i - 1) >> 1
            if ev_less(&ev, &self.data[parent]):
                self.data[i] = self.data[parent]
                i = parent
            else:
                break
        self.data[i] = ev
        return 0

    cdef Event pop(self) noexcept:
        cdef Event top = self.data[0]
        cdef Event last
        cdef Py_ssize_t i = 0, child, n
        self.size -= 1
        n = self.size
        if n > 0:
            last = self.data[n]
            while True:
                child = 2 * i + 1
                if child >= n:
                    break
                if child + 1 < n and ev_less(&self.data[child + 1], &self.data[child]):
                    child += 1
                if ev_less(&self.data[child], &last):
                    self.data[i] = self.data[child]
                    i = child
                else:
                    break
            self.data[i] = last
        return top


cdef class _Grid:
    """Dense infected-flag grid centred on the origin, doubled on demand."""
    cdef unsigned char* cells
    cdef Py_ssize_t radius
    cdef Py_ssize_t side

    def __cinit__(self, Py_ssize_t radius):
        self.radius = radius
        self.side = 2 * radius + 1
        self.cells = <unsigned char*> calloc(self.side * self.side, 1)
        if self.cells == NULL:
            raise MemoryError()

    def __dealloc__(self):
        free(self.cells)

    cdef inline bint get(self, int x, int y) noexcept:
        return self.cells[(x + self.radius) * self.side + (y + self.radius)]

    cdef int set(self, int x, int y) except -1:
        if x + 2 > self.radius or -x + 2 > self.radius or y + 2 > self.radius or -y + 2 > self.radius:
            self.grow()
        self.cells[(x + self.radius) * self.side + (y + self.radius)] = 1
        return 0

    cdef int grow(self) except -1:
        cdef Py_ssize_t r2 = 2 * self.radius
        cdef Py_ssize_t s2 = 2 * r2 + 1
        cdef Py_ssize_t i, off = r2 - self.radius
        cdef unsigned char* fresh = <unsigned char*> calloc(s2 * s2, 1)
        if fresh == NULL:
            raise MemoryError()
        for i in range(self.side):
            memcpy_row(fresh + (i + off) * s2 + off, self.cells + i * self.side, self.side)
        free(self.cells)
        self.cells = fresh
        self.radius = r2
        self.side = s2
        return 0


cdef inline void memcpy_row(unsigned char* dst, unsigned char* src, Py_ssize_t n) noexcept:
    cdef Py_ssize_t k
    for k in range(n):
        dst[k] = src[k]


cdef int[4] DX = [1, -1, 0, 0]
cdef int[4] DY = [0, 0, 1, -1]


def grow(long long budget, object refill, long long bound=-1, object lookup=None):
    """See ``fppshape._fpp_py.grow``."""
    cdef _Heap heap = _Heap()
    cdef _Grid grid = _Grid(64)
    cdef Py_ssize_t cap = 4096, n = 1
    cdef int* xs = <int*> malloc(cap * sizeof(int))
    cdef int* ys = <int*> malloc(cap * sizeof(int))
    cdef double* ts = <double*> malloc(cap * sizeof(double))
    cdef double[::1] buf = None
    cdef Py_ssize_t pos = 0, buflen = 0
    cdef long long pops = 0
    cdef Event ev
    cdef int k, nx, ny, cx, cy
    cdef double w, ct
    cdef bint use_lookup = lookup is not None

    if xs == NULL or ys == NULL or ts == NULL:
        free(xs); free(ys); free(ts)
        raise MemoryError()
    try:
        xs[0] = 0
        ys[0] = 0
        ts[0] = 0.0
        grid.set(0, 0)
        cx = 0
        cy = 0
        ct = 0.0
        if budget > 0:
            while True:
                for k in range(4):
                    nx = cx + DX[k]
                    ny = cy + DY[k]
                    if bound >= 0 and (nx > bound or nx < -bound or ny > bound or ny < -bound):
                        continue
                    if grid.get(nx, ny):
                        continue
                    if use_lookup:
                        w = float(lookup(cx, cy, nx, ny))
                    else:
                        if pos >= buflen:
                            buf = np.ascontiguousarray(refill(), dtype=np.float64)
                            buflen = buf.shape[0]
                            pos = 0
                            if buflen == 0:
                                raise RuntimeError("weight refill returned an empty block")
                        w = buf[pos]
                        pos += 1
                    heap.push(ct + w, nx, ny)

                # next infection
                while pops < budget and heap.size > 0:
                    ev = heap.pop()
                    pops += 1
                    if not grid.get(ev.x, ev.y):
                        break
                else:
                    break
                grid.set(ev.x, ev.y)
                if n == cap:
                    if not _grow_buffers(&xs, &ys, &ts, cap):
                        raise MemoryError()
                    cap *= 2
                xs[n] = ev.x
                ys[n] = ev.y
                ts[n] = ev.t
                n += 1
                cx = ev.x
                cy = ev.y
                ct = ev.t

        out_x = np.empty(n, dtype=np.int32)
        out_y = np.empty(n, dtype=np.int32)
        out_t = np.empty(n, dtype=np.float64)
        _copy_out(out_x, out_y, out_t, xs, ys, ts, n)
        return out_x, out_y, out_t, pops
    finally:
        free(xs)
        free(ys)
        free(ts)


cdef bint _grow_buffers(int** xs, int** ys, double** ts, Py_ssize_t cap) noexcept:
    cdef int* nx
    cdef int* ny
    cdef double* nt
    nx = <int*> realloc(xs[0], 2 * cap * sizeof(int))
    if nx == NULL:
        return False
    xs[0] = nx
    ny = <int*> realloc(ys[0], 2 * cap * sizeof(int))
    if ny == NULL:
        return False
    ys[0] = ny
    nt = <double*> realloc(ts[0], 2 * cap * sizeof(double))
    if nt == NULL:
        return False
    ts[0] = nt
    return True


cdef void _copy_out(int[::1] ox, int[::1] oy, double[::1] ot,
                    int* xs, int* ys, double* ts, Py_ssize_t n) noexcept:
    cdef Py_ssize_t i
    for i in range(n):
        ox[i] = xs[i]
        oy[i] = ys[i]
        ot[i] = ts[i]
