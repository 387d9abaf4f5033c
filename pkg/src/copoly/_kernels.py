"""Hot loops for the renewal dynamic programs, jitted with numba.

Every kernel works in the log domain.  The excursion weight
psi = (1 + exp(u)) / 2 with u = -2*beta*(S_b - S_a) splits the renewal sum
into two streams, one plain and one carrying exp(2*beta*S) factors, so the
inner loop is a pair of shifted log-sum-exp accumulations:

    Z[j] = 1/2 * sum_m rho(m) Z[j-m]
         + 1/2 * exp(-c[j]) * sum_m rho(m) Z[j-m] exp(c[j-m]),   c = 2*beta*S.

Prefix maxima of both streams bound the remainder of the inner sum, which
lets the loop stop once the tail cannot contribute above e^-60 relative
accuracy; in the localized phase this cuts the window to O(1/g) terms.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a hard dependency, kept importable
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap

NEG_INF = -math.inf
LOG_HALF = math.log(0.5)
_SKIP = -46.0     # terms this far below the running max cannot move the sum
_BREAK = -60.0    # remainder bound threshold for stopping the inner loop
_CHECK = 128      # lattice steps between remainder-bound checks


@njit(cache=True, nogil=True)
def _softplus(u):
    if u > 0.0:
        return u + math.log1p(math.exp(-u))
    return math.log1p(math.exp(u))


@njit(cache=True, nogil=True)
def constrained_dp(c, log_rho, lr_sufmax, period, n, m_window):
    """Constrained partition sums log Z[0..n]; c[j] = 2*beta*(prefix sum)_j.

    log_rho is indexed by excursion length (-inf off support), lr_sufmax[m]
    bounds log_rho on [m, m_window].  Entries off the period lattice stay
    -inf (unreachable parity).
    """
    log_z = np.full(n + 1, NEG_INF)
    lb = np.full(n + 1, NEG_INF)       # log Z[j] + c[j]
    pma = np.full(n + 1, NEG_INF)      # prefix max of log_z
    pmb = np.full(n + 1, NEG_INF)      # prefix max of lb
    log_z[0] = 0.0
    lb[0] = c[0]
    pma[0] = 0.0
    pmb[0] = c[0]

    for j in range(1, n + 1):
        if j % period != 0:
            pma[j] = pma[j - 1]
            pmb[j] = pmb[j - 1]
            continue
        w = j if j < m_window else m_window
        # pass 1: running maxima of both streams, with remainder-bound cutoff
        max_a = NEG_INF
        max_b = NEG_INF
        m_eff = w
        steps = 0
        m = period
        while m <= w:
            k = j - m
            lr = log_rho[m]
            t = log_z[k] + lr
            if t > max_a:
                max_a = t
            t = lb[k] + lr
            if t > max_b:
                max_b = t
            steps += 1
            if steps % _CHECK == 0 and m + period <= w:
                bound = lr_sufmax[m + period]
                if (
                    pma[k] + bound < max_a + _BREAK
                    and pmb[k] + bound < max_b + _BREAK
                ):
                    m_eff = m
                    break
            m += period
        # pass 2: shifted sums over the effective window
        sum_a = 0.0
        sum_b = 0.0
        m = period
        while m <= m_eff:
            k = j - m
            lr = log_rho[m]
            t = log_z[k] + lr - max_a
            if t > _SKIP:
                sum_a += math.exp(t)
            t = lb[k] + lr - max_b
            if t > _SKIP:
                sum_b += math.exp(t)
            m += period
        lse_a = max_a + math.log(sum_a) if sum_a > 0.0 else NEG_INF
        lse_b = max_b + math.log(sum_b) - c[j] if sum_b > 0.0 else NEG_INF
        if lse_a == NEG_INF and lse_b == NEG_INF:
            val = NEG_INF
        elif lse_a >= lse_b:
            val = lse_a + math.log1p(math.exp(lse_b - lse_a))
        else:
            val = lse_b + math.log1p(math.exp(lse_a - lse_b))
        val += LOG_HALF
        log_z[j] = val
        lb[j] = val + c[j]
        pma[j] = val if val > pma[j - 1] else pma[j - 1]
        pmb[j] = lb[j] if lb[j] > pmb[j - 1] else pmb[j - 1]
    return log_z


@njit(cache=True, nogil=True)
def free_combine(log_z, c, log_surv, n):
    """Free partition sum: constrained renewal up to k, incomplete last stretch.

    log Z_free = LSE_k [ log Z[k] + log(1/2) + log survival(n-k)
                         + softplus(-(c[n]-c[k])) ].
    """
    max_t = NEG_INF
    for k in range(n + 1):
        if log_z[k] == NEG_INF:
            continue
        t = log_z[k] + log_surv[n - k] + _softplus(c[k] - c[n])
        if t > max_t:
            max_t = t
    if max_t == NEG_INF:
        return NEG_INF
    s = 0.0
    for k in range(n + 1):
        if log_z[k] == NEG_INF:
            continue
        t = log_z[k] + log_surv[n - k] + _softplus(c[k] - c[n]) - max_t
        if t > _SKIP:
            s += math.exp(t)
    return LOG_HALF + max_t + math.log(s)


@njit(cache=True, nogil=True)
def renewal_dp(w, w_sufmax, period, n, m_window):
    """Deterministic renewal recursion log Z[j] = LSE_m(log Z[j-m] + w[m])."""
    log_z = np.full(n + 1, NEG_INF)
    pm = np.full(n + 1, NEG_INF)
    log_z[0] = 0.0
    pm[0] = 0.0
    for j in range(1, n + 1):
        if j % period != 0:
            pm[j] = pm[j - 1]
            continue
        win = j if j < m_window else m_window
        max_t = NEG_INF
        m_eff = win
        steps = 0
        m = period
        while m <= win:
            t = log_z[j - m] + w[m]
            if t > max_t:
                max_t = t
            steps += 1
            if steps % _CHECK == 0 and m + period <= win:
                if pm[j - m] + w_sufmax[m + period] < max_t + _BREAK:
                    m_eff = m
                    break
            m += period
        s = 0.0
        m = period
        while m <= m_eff:
            t = log_z[j - m] + w[m] - max_t
            if t > _SKIP:
                s += math.exp(t)
            m += period
        val = max_t + math.log(s) if s > 0.0 else NEG_INF
        log_z[j] = val
        pm[j] = val if val > pm[j - 1] else pm[j - 1]
    return log_z


@njit(cache=True, nogil=True)
def annealed_free_combine(log_z, log_surv, delta, n):
    """Final-stretch completion with the averaged weight (1 + exp(l*delta)) / 2."""
    max_t = NEG_INF
    for k in range(n + 1):
        if log_z[k] == NEG_INF:
            continue
        t = log_z[k] + log_surv[n - k] + _softplus((n - k) * delta)
        if t > max_t:
            max_t = t
    if max_t == NEG_INF:
        return NEG_INF
    s = 0.0
    for k in range(n + 1):
        if log_z[k] == NEG_INF:
            continue
        t = log_z[k] + log_surv[n - k] + _softplus((n - k) * delta) - max_t
        if t > _SKIP:
            s += math.exp(t)
    return LOG_HALF + max_t + math.log(s)


@njit(cache=True, nogil=True)
def excursion_series_dp(c, log_rho_tilt, period, n_exc, k_max, m_cut, tail_info):
    """log F_N for N = 1..n_exc via the excursion-count indexed recursion.

    log_rho_tilt[m] = log rho(m) - g*m; the tilt normalizer cancels between
    the N-fold prefactor and the tilted excursion law, so F_N is the plain
    sum over endpoints of the N-excursion weights.  tail_info (length 2)
    receives the log mass of the last row carried by the top 5% of the
    endpoint range and the log mass of the whole row, so callers can detect
    a clipped endpoint window.
    """
    log_f = np.full(n_exc + 1, NEG_INF)
    prev = np.full(k_max + 1, NEG_INF)
    prev_b = np.full(k_max + 1, NEG_INF)
    prev[0] = 0.0
    prev_b[0] = c[0]
    cur = np.empty(k_max + 1)
    cur_b = np.empty(k_max + 1)
    for big_n in range(1, n_exc + 1):
        for k in range(k_max + 1):
            cur[k] = NEG_INF
            cur_b[k] = NEG_INF
        k_lo = big_n * period
        row_max = NEG_INF
        for k in range(k_lo, k_max + 1):
            if k % period != 0:
                continue
            w = k - (big_n - 1) * period
            if w > m_cut:
                w = m_cut
            max_a = NEG_INF
            max_b = NEG_INF
            m = period
            while m <= w:
                i = k - m
                lr = log_rho_tilt[m]
                t = prev[i] + lr
                if t > max_a:
                    max_a = t
                t = prev_b[i] + lr
                if t > max_b:
                    max_b = t
                m += period
            sum_a = 0.0
            sum_b = 0.0
            m = period
            while m <= w:
                i = k - m
                lr = log_rho_tilt[m]
                t = prev[i] + lr - max_a
                if t > _SKIP:
                    sum_a += math.exp(t)
                t = prev_b[i] + lr - max_b
                if t > _SKIP:
                    sum_b += math.exp(t)
                m += period
            lse_a = max_a + math.log(sum_a) if sum_a > 0.0 else NEG_INF
            lse_b = max_b + math.log(sum_b) - c[k] if sum_b > 0.0 else NEG_INF
            if lse_a == NEG_INF and lse_b == NEG_INF:
                val = NEG_INF
            elif lse_a >= lse_b:
                val = lse_a + math.log1p(math.exp(lse_b - lse_a))
            else:
                val = lse_b + math.log1p(math.exp(lse_a - lse_b))
            val += LOG_HALF
            cur[k] = val
            cur_b[k] = val + c[k]
            if val > row_max:
                row_max = val
        # log F_N = LSE_k cur[k]
        if row_max == NEG_INF:
            log_f[big_n] = NEG_INF
        else:
            s = 0.0
            for k in range(k_lo, k_max + 1):
                t = cur[k] - row_max
                if t > _SKIP:
                    s += math.exp(t)
            log_f[big_n] = row_max + math.log(s)
        if big_n == n_exc:
            k_edge = k_max - (k_max - k_lo) // 20
            s_edge = 0.0
            for k in range(k_edge, k_max + 1):
                t = cur[k] - row_max
                if t > _SKIP:
                    s_edge += math.exp(t)
            tail_info[0] = row_max + math.log(s_edge) if s_edge > 0.0 else NEG_INF
            tail_info[1] = log_f[big_n]
        tmp = prev
        prev = cur
        cur = tmp
        tmp = prev_b
        prev_b = cur_b
        cur_b = tmp
    return log_f


@njit(cache=True, nogil=True)
def backward_sample(log_z, c, log_rho, period, n, m_window, uniforms, gaps, signs):
    """One path from the constrained measure, sampled backward through the table.

    From endpoint j the previous return is at j - m with probability
    exp(log Z[j-m] + log rho(m) + log psi((j-m, j]) - log Z[j]); the side of
    each excursion is below the interface with the logistic probability
    sigmoid(-(c[j] - c[j-m])).  Fills gaps/signs from the path end backward
    and returns the number of excursions.
    """
    j = n
    t_count = 0
    u_idx = 0
    while j > 0:
        total = log_z[j]
        u = uniforms[u_idx]
        u_idx += 1
        acc = 0.0
        chosen = -1
        last_valid = -1
        w = j if j < m_window else m_window
        m = period
        while m <= w:
            k = j - m
            if log_z[k] != NEG_INF and log_rho[m] != NEG_INF:
                lw = (
                    log_z[k]
                    + log_rho[m]
                    + LOG_HALF
                    + _softplus(c[k] - c[j])
                    - total
                )
                acc += math.exp(lw)
                last_valid = m
                if acc >= u:
                    chosen = m
                    break
            m += period
        if chosen < 0:
            chosen = last_valid  # cumulative rounding fell short of u
        k = j - chosen
        u2 = uniforms[u_idx]
        u_idx += 1
        d = c[k] - c[j]  # log weight ratio below/above
        if d >= 0.0:
            p_below = 1.0 / (1.0 + math.exp(-d))
        else:
            e = math.exp(d)
            p_below = e / (1.0 + e)
        gaps[t_count] = chosen
        signs[t_count] = -1 if u2 < p_below else 1
        t_count += 1
        j = k
    return t_count
