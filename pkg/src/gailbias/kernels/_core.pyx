# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Same contracts as gailbias.kernels.fallback.

actor_forward skips zero observation entries; observations here are sparse
one-hot stacks, so this is the main win over the dense BLAS path.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs

cnp.import_array()

CHAIN_EXPERT = 0
CHAIN_LOOP = 1
CHAIN_TERMINATE = 2


def actor_forward(double[::1] obs, double[:, ::1] w1, double[::1] b1,
                  double[:, ::1] wp, double[::1] bp,
                  double[::1] wv, double bv, double slope):
    cdef Py_ssize_t n_in = obs.shape[0]
    cdef Py_ssize_t n_h = b1.shape[0]
    cdef Py_ssize_t n_a = bp.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double x, hj, value, mx, total

    cdef cnp.ndarray[double, ndim=1] h_arr = np.empty(n_h, dtype=np.float64)
    cdef double[::1] h = h_arr
    for j in range(n_h):
        h[j] = b1[j]
    for i in range(n_in):
        x = obs[i]
        if x != 0.0:
            for j in range(n_h):
                h[j] += x * w1[i, j]
    value = bv
    for j in range(n_h):
        hj = h[j]
        if hj <= 0.0:
            hj = slope * hj
            h[j] = hj
        value += hj * wv[j]

    cdef cnp.ndarray[double, ndim=1] probs_arr = np.empty(n_a, dtype=np.float64)
    cdef double[::1] probs = probs_arr
    mx = -1e300
    for k in range(n_a):
        x = bp[k]
        for j in range(n_h):
            x += h[j] * wp[j, k]
        probs[k] = x
        if x > mx:
            mx = x
    total = 0.0
    for k in range(n_a):
        x = exp(probs[k] - mx)
        probs[k] = x
        total += x
    for k in range(n_a):
        probs[k] /= total
    return probs_arr, value


def gae_scan(double[::1] rewards, double[::1] values, double[::1] next_values,
             cnp.uint8_t[::1] cont, double gamma, double lam):
    cdef Py_ssize_t n = rewards.shape[0]
    cdef cnp.ndarray[double, ndim=1] adv_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] adv = adv_arr
    cdef double acc = 0.0
    cdef double delta
    cdef Py_ssize_t t
    for t in range(n - 1, -1, -1):
        delta = rewards[t] + gamma * next_values[t] - values[t]
        acc = delta + gamma * lam * acc * cont[t]
        adv[t] = acc
    return adv_arr


def chain_value_iteration(int p, double reward, double gamma, double loop_reward,
                          int term_state, double term_reward, double tol,
                          int max_iter):
    cdef cnp.ndarray[double, ndim=1] v_arr = np.zeros(p + 1, dtype=np.float64)
    cdef double[::1] v = v_arr
    cdef cnp.ndarray[double, ndim=1] new_arr = np.empty(p, dtype=np.float64)
    cdef double[::1] new = new_arr
    cdef double q_e, q_b, diff, d
    cdef Py_ssize_t i
    cdef int it = 0
    while it < max_iter:
        it += 1
        diff = 0.0
        for i in range(p):
            q_e = reward + gamma * v[i + 1]
            q_b = loop_reward + gamma * v[i - 1 if i > 0 else 0]
            new[i] = q_e if q_e >= q_b else q_b
        if term_state >= 0 and term_reward > new[term_state]:
            new[term_state] = term_reward
        for i in range(p):
            d = fabs(new[i] - v[i])
            if d > diff:
                diff = d
            v[i] = new[i]
        if diff < tol:
            break
    cdef cnp.ndarray[cnp.int8_t, ndim=1] pol_arr = np.empty(p, dtype=np.int8)
    cdef cnp.int8_t[::1] pol = pol_arr
    for i in range(p):
        q_e = reward + gamma * v[i + 1]
        q_b = loop_reward + gamma * v[i - 1 if i > 0 else 0]
        pol[i] = CHAIN_EXPERT if q_e >= q_b else CHAIN_LOOP
        if i == term_state and term_reward > (q_e if q_e >= q_b else q_b):
            pol[i] = CHAIN_TERMINATE
    return v_arr, pol_arr, it
