# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled core: element-wise Bessel routines and the mixture reduction.

Same algorithms as ``_special_py`` (Temme series below x = 2, Steed's
continued fractions above) written as scalar C loops, plus the log-sum-exp
posterior reduction that every mixture field evaluation goes through.
All loops run without the GIL.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport (sqrt, exp, log, sin, sinh, cosh, fabs, copysign,
                        M_PI, INFINITY)

cnp.import_array()

cdef double EPS = 1e-16
cdef double FPMIN = 1e-30
cdef int MAXIT = 100000
cdef double XMIN = 2.0

cdef double[28] RGAMMA = [
    1.0,
    5.7721566490153286e-1,
    -6.5587807152025388e-1,
    -4.2002635034095236e-2,
    1.6653861138229149e-1,
    -4.2197734555544337e-2,
    -9.6219715278769736e-3,
    7.2189432466630995e-3,
    -1.1651675918590651e-3,
    -2.1524167411495097e-4,
    1.2805028238811619e-4,
    -2.0134854780788239e-5,
    -1.2504934821426707e-6,
    1.1330272319816959e-6,
    -2.0563384169776071e-7,
    6.1160951044814158e-9,
    5.0020076444692229e-9,
    -1.1812745704870201e-9,
    1.0434267116911005e-10,
    7.7822634399050713e-12,
    -3.6968056186422057e-12,
    5.100370287454476e-13,
    -2.0583260535665068e-14,
    -5.348122539423018e-15,
    1.2267786282382608e-15,
    -1.1812593016974588e-16,
    1.1866922547516003e-18,
    1.4123806553180318e-18,
]


cdef void temme_gammas(double mu, double *gam1, double *gam2,
                       double *gampl, double *gammi) noexcept nogil:
    cdef double mu2 = mu * mu, odd = 0.0, even = 0.0, p = 1.0
    cdef int k
    for k in range(0, 27, 2):
        even += RGAMMA[k] * p
        odd += RGAMMA[k + 1] * p
        p *= mu2
    gam1[0] = -odd
    gam2[0] = even
    gampl[0] = even + mu * odd
    gammi[0] = even - mu * odd


cdef int bessik(double nu, double x, bint scaled,
                double *rk, double *rk1) noexcept nogil:
    """K_nu and K_{nu+1}; returns 0 on success, 1 on non-convergence."""
    cdef int nl = <int>(nu + 0.5), i
    cdef double mu = nu - nl, mu2 = mu * mu, xi2 = 2.0 / x
    cdef double x2, pimu, fact, d, e, fact2, ff, total, total1, p, q, c, dd
    cdef double delta, gam1, gam2, gampl, gammi
    cdef double b, h, delh, q1, q2, qnew, a1, a, cc, s, dels, kmu, kp, ktemp
    if x < XMIN:
        x2 = 0.5 * x
        pimu = M_PI * mu
        fact = 1.0 if fabs(pimu) < EPS else pimu / sin(pimu)
        d = -log(x2)
        e = mu * d
        fact2 = 1.0 if fabs(e) < EPS else sinh(e) / e
        temme_gammas(mu, &gam1, &gam2, &gampl, &gammi)
        ff = fact * (gam1 * cosh(e) + gam2 * fact2 * d)
        total = ff
        e = exp(e)
        p = 0.5 * e / gampl
        q = 0.5 / (e * gammi)
        c = 1.0
        dd = x2 * x2
        total1 = p
        i = 1
        while True:
            ff = (i * ff + p + q) / (i * i - mu2)
            c = c * dd / i
            p = p / (i - mu)
            q = q / (i + mu)
            delta = c * ff
            total += delta
            total1 += c * (p - i * ff)
            if fabs(delta) < fabs(total) * EPS:
                break
            i += 1
            if i >= MAXIT:
                return 1
        kmu = total
        kp = total1 * xi2
        if scaled:
            kmu *= exp(x)
            kp *= exp(x)
    else:
        b = 2.0 * (1.0 + x)
        d = 1.0 / b
        h = d
        delh = d
        q1 = 0.0
        q2 = 1.0
        a1 = 0.25 - mu2
        q = a1
        cc = a1
        a = -a1
        s = 1.0 + q * delh
        i = 2
        while True:
            a -= 2 * (i - 1)
            cc = -a * cc / i
            qnew = (q1 - b * q2) / a
            q1 = q2
            q2 = qnew
            q += cc * qnew
            b += 2.0
            d = 1.0 / (b + a * d)
            delh = (b * d - 1.0) * delh
            h += delh
            dels = q * delh
            s += dels
            if fabs(dels / s) < EPS:
                break
            i += 1
            if i >= MAXIT:
                return 1
        h = a1 * h
        kmu = sqrt(M_PI / (2.0 * x)) / s
        if not scaled:
            kmu *= exp(-x)
        kp = kmu * (mu + x + 0.5 - h) / x
    for i in range(1, nl + 1):
        ktemp = (mu + i) * xi2 * kp + kmu
        kmu = kp
        kp = ktemp
    rk[0] = kmu
    rk1[0] = kp
    return 0


cdef int bessjy(double nu, double x, double *rj, double *ry, double *rjp,
                double *ryp, double *ry1out) noexcept nogil:
    """J, Y, J', Y' of order nu and Y_{nu+1}; 0 on success."""
    cdef int nl, i, isign, l
    cdef double mu, mu2, xi, xi2, w, h, b, d, c, delta, rjl, rjpl, rjl1, rjp1
    cdef double fact, rjtemp, f, rjmu, rymu, rymup, ry1, x2, pimu, e, fact2
    cdef double gam1, gam2, gampl, gammi, ff, p, q, pimu2, fact3, r, total
    cdef double total1, del1, a, br, bi, cr, ci, den, dr, di, dlr, dli, temp
    cdef double gam, rytemp
    if x < XMIN:
        nl = <int>(nu + 0.5)
    else:
        nl = <int>(nu - x + 1.5)
        if nl < 0:
            nl = 0
    mu = nu - nl
    mu2 = mu * mu
    xi = 1.0 / x
    xi2 = 2.0 * xi
    w = xi2 / M_PI
    isign = 1
    h = nu * xi
    if h < FPMIN:
        h = FPMIN
    b = xi2 * nu
    d = 0.0
    c = h
    i = 1
    while True:
        b += xi2
        d = b - d
        if fabs(d) < FPMIN:
            d = FPMIN
        c = b - 1.0 / c
        if fabs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        delta = c * d
        h = delta * h
        if d < 0.0:
            isign = -isign
        if fabs(delta - 1.0) < EPS:
            break
        i += 1
        if i >= MAXIT:
            return 1
    rjl = isign * FPMIN
    rjpl = h * rjl
    rjl1 = rjl
    rjp1 = rjpl
    fact = nu * xi
    for l in range(nl, 0, -1):
        rjtemp = fact * rjl + rjpl
        fact -= xi
        rjpl = fact * rjtemp - rjl
        rjl = rjtemp
    if rjl == 0.0:
        rjl = EPS
    f = rjpl / rjl
    if x < XMIN:
        x2 = 0.5 * x
        pimu = M_PI * mu
        fact = 1.0 if fabs(pimu) < EPS else pimu / sin(pimu)
        d = -log(x2)
        e = mu * d
        fact2 = 1.0 if fabs(e) < EPS else sinh(e) / e
        temme_gammas(mu, &gam1, &gam2, &gampl, &gammi)
        ff = 2.0 / M_PI * fact * (gam1 * cosh(e) + gam2 * fact2 * d)
        e = exp(e)
        p = e / (gampl * M_PI)
        q = 1.0 / (e * M_PI * gammi)
        pimu2 = 0.5 * pimu
        fact3 = 1.0 if fabs(pimu2) < EPS else sin(pimu2) / pimu2
        r = M_PI * pimu2 * fact3 * fact3
        c = 1.0
        d = -x2 * x2
        total = ff + r * q
        total1 = p
        i = 1
        while True:
            ff = (i * ff + p + q) / (i * i - mu2)
            c *= d / i
            p /= (i - mu)
            q /= (i + mu)
            delta = c * (ff + r * q)
            total += delta
            del1 = c * p - i * delta
            total1 += del1
            if fabs(delta) < (1.0 + fabs(total)) * EPS:
                break
            i += 1
            if i >= MAXIT:
                return 1
        rymu = -total
        ry1 = -total1 * xi2
        rymup = mu * xi * rymu - ry1
        rjmu = w / (rymup - f * rymu)
    else:
        a = 0.25 - mu2
        p = -0.5 * xi
        q = 1.0
        br = 2.0 * x
        bi = 2.0
        fact = a * xi / (p * p + q * q)
        cr = br + q * fact
        ci = bi + p * fact
        den = br * br + bi * bi
        dr = br / den
        di = -bi / den
        dlr = cr * dr - ci * di
        dli = cr * di + ci * dr
        temp = p * dlr - q * dli
        q = p * dli + q * dlr
        p = temp
        i = 2
        while True:
            a += 2 * (i - 1)
            bi += 2.0
            dr = a * dr + br
            di = a * di + bi
            if fabs(dr) + fabs(di) < FPMIN:
                dr = FPMIN
            fact = a / (cr * cr + ci * ci)
            cr = br + cr * fact
            ci = bi - ci * fact
            if fabs(cr) + fabs(ci) < FPMIN:
                cr = FPMIN
            den = dr * dr + di * di
            dr /= den
            di /= -den
            dlr = cr * dr - ci * di
            dli = cr * di + ci * dr
            temp = p * dlr - q * dli
            q = p * dli + q * dlr
            p = temp
            if fabs(dlr - 1.0) + fabs(dli) < EPS:
                break
            i += 1
            if i >= MAXIT:
                return 1
        gam = (p - f) / q
        rjmu = sqrt(w / ((p - f) * gam + q))
        rjmu = copysign(rjmu, rjl)
        rymu = rjmu * gam
        rymup = rymu * (p + q / gam)
        ry1 = mu * xi * rymu - rymup
    fact = rjmu / rjl
    rj[0] = rjl1 * fact
    rjp[0] = rjp1 * fact
    for i in range(1, nl + 1):
        rytemp = (mu + i) * xi2 * ry1 - rymu
        rymu = ry1
        ry1 = rytemp
    ry[0] = rymu
    ryp[0] = nu * xi * rymu - ry1
    ry1out[0] = ry1
    return 0


def kv_pair(double nu, x, bint scaled=False):
    """K_nu(x), K_{nu+1}(x) for a 1-D array x > 0 (optionally times e^x)."""
    cdef cnp.float64_t[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], j
    out0 = np.empty(n)
    out1 = np.empty(n)
    cdef cnp.float64_t[::1] o0 = out0, o1 = out1
    cdef int bad = 0
    with nogil:
        for j in range(n):
            if bessik(nu, xv[j], scaled, &o0[j], &o1[j]):
                bad = 1
    if bad:
        raise ArithmeticError("Bessel K evaluation did not converge")
    return out0, out1


def jy(double nu, x):
    """(J_nu, Y_nu, J'_nu, Y'_nu, Y_{nu+1}) for a 1-D array x > 0."""
    cdef cnp.float64_t[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], j
    outs = [np.empty(n) for _ in range(5)]
    cdef cnp.float64_t[::1] a0 = outs[0], a1 = outs[1], a2 = outs[2]
    cdef cnp.float64_t[::1] a3 = outs[3], a4 = outs[4]
    cdef int bad = 0
    with nogil:
        for j in range(n):
            if bessjy(nu, xv[j], &a0[j], &a1[j], &a2[j], &a3[j], &a4[j]):
                bad = 1
    if bad:
        raise ArithmeticError("Bessel J/Y evaluation did not converge")
    return tuple(outs)


def posterior_reduce(logq, disp, aux):
    """Log-sum-exp reduction over sources.

    Parameters
    ----------
    logq : (M, K) array
        Log of weight times kernel density, per point and source.
    disp : (M, K, N) array
        Displacement x - x_i.
    aux : (M, K) array
        Any per-source scalar to be averaged under the posterior.

    Returns
    -------
    logp : (M,) array
        log of the mixture density; -inf where every term underflows.
    mean_disp : (M, N) array
    mean_aux : (M,) array
    """
    cdef cnp.float64_t[:, ::1] lq = np.ascontiguousarray(logq, dtype=np.float64)
    cdef cnp.float64_t[:, :, ::1] dv = np.ascontiguousarray(disp, dtype=np.float64)
    cdef cnp.float64_t[:, ::1] av = np.ascontiguousarray(aux, dtype=np.float64)
    cdef Py_ssize_t m = lq.shape[0], k = lq.shape[1], nd = dv.shape[2]
    cdef Py_ssize_t i, j, a
    logp = np.empty(m)
    mean_disp = np.zeros((m, nd))
    mean_aux = np.zeros(m)
    cdef cnp.float64_t[::1] lp = logp, ma = mean_aux
    cdef cnp.float64_t[:, ::1] md = mean_disp
    cdef double top, wsum, wj
    with nogil:
        for i in range(m):
            top = -INFINITY
            for j in range(k):
                if lq[i, j] > top:
                    top = lq[i, j]
            if top == -INFINITY:
                lp[i] = -INFINITY
                continue
            wsum = 0.0
            for j in range(k):
                wj = exp(lq[i, j] - top)
                wsum += wj
                ma[i] += wj * av[i, j]
                for a in range(nd):
                    md[i, a] += wj * dv[i, j, a]
            lp[i] = top + log(wsum)
            ma[i] /= wsum
            for a in range(nd):
                md[i, a] /= wsum
    return logp, mean_disp, mean_aux
