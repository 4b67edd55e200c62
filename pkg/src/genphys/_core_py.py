"""Pure-NumPy twin of the compiled core (the fallback backend).

Real order ``nu >= 0`` is a scalar; the argument is a 1-D float64 array of
strictly positive values. For ``x < 2`` the order is reduced to
``|mu| <= 1/2`` and Temme's series is summed; for ``x >= 2`` Steed's
continued fractions are used. Results are carried to the requested order by
the stable recurrence in each case (upward for K and Y, downward for J).

Loops whose length depends on the argument run on a shrinking set of
still-unconverged entries so a single slow element does not hold the rest.
"""

import math

import numpy as np

EPS = 1e-16
FPMIN = 1e-30
MAXIT = 100000
XMIN = 2.0

# Taylor coefficients of 1/Gamma(1+x) about 0.
_RGAMMA = (
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
)


def temme_gammas(mu):
    """Return ``(gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu))`` for |mu| <= 1/2.

    ``gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu)`` and
    ``gam2 = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2``, both summed from the
    even/odd halves of the Taylor series so nothing cancels at small mu.
    """
    mu2 = mu * mu
    odd = 0.0
    even = 0.0
    p = 1.0
    for k in range(0, len(_RGAMMA) - 1, 2):
        even += _RGAMMA[k] * p
        odd += _RGAMMA[k + 1] * p
        p *= mu2
    gam1 = -odd
    gam2 = even
    return gam1, gam2, gam2 - mu * gam1, gam2 + mu * gam1


def _check(nu, x):
    if nu < 0:
        raise ValueError("order must be non-negative here")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("argument must be 1-D")
    return x


def kv_pair(nu, x, scaled=False):
    """K_nu(x) and K_{nu+1}(x); with ``scaled`` both are multiplied by e^x."""
    x = _check(nu, x)
    n = x.size
    nl = int(nu + 0.5)
    mu = nu - nl
    mu2 = mu * mu
    kmu = np.empty(n)
    k1 = np.empty(n)

    small = x < XMIN
    if small.any():
        xs = x[small]
        x2 = 0.5 * xs
        pimu = math.pi * mu
        fact = 1.0 if abs(pimu) < EPS else pimu / math.sin(pimu)
        d = -np.log(x2)
        e = mu * d
        with np.errstate(invalid="ignore", divide="ignore"):
            fact2 = np.where(np.abs(e) < EPS, 1.0, np.sinh(e) / e)
        gam1, gam2, gampl, gammi = temme_gammas(mu)
        ff = fact * (gam1 * np.cosh(e) + gam2 * fact2 * d)
        total = ff.copy()
        e = np.exp(e)
        p = 0.5 * e / gampl
        q = 0.5 / (e * gammi)
        c = np.ones_like(xs)
        dd = x2 * x2
        total1 = p.copy()
        for i in range(1, MAXIT):
            ff = (i * ff + p + q) / (i * i - mu2)
            c = c * dd / i
            p = p / (i - mu)
            q = q / (i + mu)
            delta = c * ff
            total += delta
            total1 += c * (p - i * ff)
            if np.all(np.abs(delta) < np.abs(total) * EPS):
                break
        else:
            raise ArithmeticError("Temme series for K did not converge")
        km = total
        kp = total1 * 2.0 / xs
        if scaled:
            ex = np.exp(xs)
            km = km * ex
            kp = kp * ex
        kmu[small] = km
        k1[small] = kp

    large = ~small
    if large.any():
        where = np.nonzero(large)[0]
        xl = x[where]
        m = xl.size
        b = 2.0 * (1.0 + xl)
        d = 1.0 / b
        h = d.copy()
        delh = d.copy()
        q1 = np.zeros(m)
        q2 = np.ones(m)
        a1 = 0.25 - mu2
        q = np.full(m, a1)
        c = a1
        a = -a1
        s = 1.0 + q * delh
        out_h = np.empty(m)
        out_s = np.empty(m)
        active = np.arange(m)
        for i in range(2, MAXIT):
            a -= 2 * (i - 1)
            c = -a * c / i
            qnew = (q1 - b * q2) / a
            q1 = q2
            q2 = qnew
            q = q + c * qnew
            b = b + 2.0
            d = 1.0 / (b + a * d)
            delh = (b * d - 1.0) * delh
            h = h + delh
            dels = q * delh
            s = s + dels
            done = np.abs(dels / s) < EPS
            if done.any():
                out_h[active[done]] = h[done]
                out_s[active[done]] = s[done]
                keep = ~done
                active = active[keep]
                if active.size == 0:
                    break
                b, d, h, delh, q1, q2, q, s = (
                    arr[keep] for arr in (b, d, h, delh, q1, q2, q, s)
                )
        else:
            raise ArithmeticError("continued fraction for K did not converge")
        hh = a1 * out_h
        km = np.sqrt(math.pi / (2.0 * xl)) / out_s
        if not scaled:
            km = km * np.exp(-xl)
        kp = km * (mu + xl + 0.5 - hh) / xl
        kmu[where] = km
        k1[where] = kp

    xi2 = 2.0 / x
    for i in range(1, nl + 1):
        ktemp = (mu + i) * xi2 * k1 + kmu
        kmu = k1
        k1 = ktemp
    return kmu, k1


def _cf1_ratio(nu, x):
    """Lentz evaluation of J'_nu/J_nu; also the sign bookkeeping of NR."""
    n = x.size
    xi = 1.0 / x
    xi2 = 2.0 * xi
    h_out = np.empty(n)
    sign_out = np.empty(n)
    h = np.maximum(nu * xi, FPMIN)
    b = xi2 * nu
    d = np.zeros(n)
    c = h.copy()
    isign = np.ones(n)
    active = np.arange(n)
    step = xi2.copy()
    for _ in range(MAXIT):
        b = b + step
        d = b - d
        d = np.where(np.abs(d) < FPMIN, FPMIN, d)
        c = b - 1.0 / c
        c = np.where(np.abs(c) < FPMIN, FPMIN, c)
        d = 1.0 / d
        delta = c * d
        h = delta * h
        isign = np.where(d < 0, -isign, isign)
        done = np.abs(delta - 1.0) < EPS
        if done.any():
            h_out[active[done]] = h[done]
            sign_out[active[done]] = isign[done]
            keep = ~done
            active = active[keep]
            if active.size == 0:
                break
            b, d, c, h, isign, step = (
                arr[keep] for arr in (b, d, c, h, isign, step)
            )
    else:
        raise ArithmeticError("continued fraction CF1 did not converge")
    return h_out, sign_out


def jy(nu, x):
    """Return ``(J_nu, Y_nu, J'_nu, Y'_nu, Y_{nu+1})`` at each x."""
    x = _check(nu, x)
    n = x.size
    small = x < XMIN
    nl = np.where(
        small,
        int(nu + 0.5),
        np.maximum(0, (nu - x + 1.5).astype(np.int64)),
    ).astype(np.int64)
    mu = nu - nl
    xi = 1.0 / x
    xi2 = 2.0 * xi
    w = xi2 / math.pi

    h, isign = _cf1_ratio(nu, x)
    rjl = isign * FPMIN
    rjpl = h * rjl
    rjl1 = rjl.copy()
    rjp1 = rjpl.copy()
    nlmax = int(nl.max()) if n else 0
    for j in range(nlmax):
        sel = j < nl
        fact = (nu - j) * xi
        rjtemp = fact * rjl + rjpl
        fact_next = (nu - j - 1) * xi
        new_rjpl = fact_next * rjtemp - rjl
        rjl = np.where(sel, rjtemp, rjl)
        rjpl = np.where(sel, new_rjpl, rjpl)
    rjl = np.where(rjl == 0.0, EPS, rjl)
    f = rjpl / rjl

    rjmu = np.empty(n)
    rymu = np.empty(n)
    ry1 = np.empty(n)

    if small.any():
        idx = np.nonzero(small)[0]
        m0 = float(mu[idx[0]])
        m2 = m0 * m0
        xs = x[idx]
        x2 = 0.5 * xs
        pimu = math.pi * m0
        fact = 1.0 if abs(pimu) < EPS else pimu / math.sin(pimu)
        d = -np.log(x2)
        e = m0 * d
        with np.errstate(invalid="ignore", divide="ignore"):
            fact2 = np.where(np.abs(e) < EPS, 1.0, np.sinh(e) / e)
        gam1, gam2, gampl, gammi = temme_gammas(m0)
        ff = 2.0 / math.pi * fact * (gam1 * np.cosh(e) + gam2 * fact2 * d)
        e = np.exp(e)
        p = e / (gampl * math.pi)
        q = 1.0 / (e * math.pi * gammi)
        pimu2 = 0.5 * pimu
        fact3 = 1.0 if abs(pimu2) < EPS else math.sin(pimu2) / pimu2
        r = math.pi * pimu2 * fact3 * fact3
        c = np.ones_like(xs)
        dd = -x2 * x2
        total = ff + r * q
        total1 = p.copy()
        for i in range(1, MAXIT):
            ff = (i * ff + p + q) / (i * i - m2)
            c = c * (dd / i)
            p = p / (i - m0)
            q = q / (i + m0)
            delta = c * (ff + r * q)
            total += delta
            total1 += c * p - i * delta
            if np.all(np.abs(delta) < (1.0 + np.abs(total)) * EPS):
                break
        else:
            raise ArithmeticError("Temme series for Y did not converge")
        ym = -total
        yp1 = -total1 * xi2[idx]
        ymup = m0 * xi[idx] * ym - yp1
        rjmu[idx] = w[idx] / (ymup - f[idx] * ym)
        rymu[idx] = ym
        ry1[idx] = yp1

    if (~small).any():
        where = np.nonzero(~small)[0]
        xl = x[where]
        ml = mu[where]
        m = xl.size
        xil = 1.0 / xl
        a = 0.25 - ml * ml
        p = -0.5 * xil
        q = np.ones(m)
        br = 2.0 * xl
        bi = 2.0
        fact = a * xil / (p * p + q * q)
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
        p_out = np.empty(m)
        q_out = np.empty(m)
        active = np.arange(m)
        for i in range(2, MAXIT):
            a = a + 2 * (i - 1)
            bi += 2.0
            dr = a * dr + br
            di = a * di + bi
            dr = np.where(np.abs(dr) + np.abs(di) < FPMIN, FPMIN, dr)
            fact = a / (cr * cr + ci * ci)
            cr = br + cr * fact
            ci = bi - ci * fact
            cr = np.where(np.abs(cr) + np.abs(ci) < FPMIN, FPMIN, cr)
            den = dr * dr + di * di
            dr = dr / den
            di = -di / den
            dlr = cr * dr - ci * di
            dli = cr * di + ci * dr
            temp = p * dlr - q * dli
            q = p * dli + q * dlr
            p = temp
            done = np.abs(dlr - 1.0) + np.abs(dli) < EPS
            if done.any():
                p_out[active[done]] = p[done]
                q_out[active[done]] = q[done]
                keep = ~done
                active = active[keep]
                if active.size == 0:
                    break
                a, p, q, br, cr, ci, dr, di = (
                    arr[keep] for arr in (a, p, q, br, cr, ci, dr, di)
                )
        else:
            raise ArithmeticError("continued fraction CF2 did not converge")
        fl = f[where]
        gam = (p_out - fl) / q_out
        rj = np.sqrt(w[where] / ((p_out - fl) * gam + q_out))
        rj = np.copysign(rj, rjl[where])
        ym = rj * gam
        ymup = ym * (p_out + q_out / gam)
        rjmu[where] = rj
        rymu[where] = ym
        ry1[where] = ml * xil * ym - ymup

    fact = rjmu / rjl
    rj = rjl1 * fact
    rjp = rjp1 * fact
    for i in range(1, nlmax + 1):
        sel = i <= nl
        rytemp = (mu + i) * xi2 * ry1 - rymu
        rymu = np.where(sel, ry1, rymu)
        ry1 = np.where(sel, rytemp, ry1)
    ryp = nu * xi * rymu - ry1
    return rj, rymu, rjp, ryp, ry1


def posterior_reduce(logq, disp, aux):
    """Log-sum-exp reduction over sources (see the compiled twin)."""
    logq = np.asarray(logq, dtype=np.float64)
    disp = np.asarray(disp, dtype=np.float64)
    aux = np.asarray(aux, dtype=np.float64)
    top = logq.max(axis=1)
    dead = ~np.isfinite(top)
    safe_top = np.where(dead, 0.0, top)
    wts = np.exp(logq - safe_top[:, None])
    wsum = wts.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        logp = np.where(dead, -np.inf, safe_top + np.log(wsum))
        norm = np.where(dead, 1.0, wsum)
        mean_disp = np.einsum("mk,mkn->mn", wts, disp) / norm[:, None]
        mean_aux = (wts * aux).sum(axis=1) / norm
    mean_disp[dead] = 0.0
    mean_aux[dead] = 0.0
    return logp, mean_disp, mean_aux
