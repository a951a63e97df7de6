"""Hot Monte Carlo kernels: joint walk+rewiring replicas and short-cut audits.

Two lanes implement the same algorithms with bit-identical randomness:

* a numba @njit lane (default), parallel over replica chunks;
* a plain numpy/Python reference lane (NBREWIRE_BACKEND=python).

Replica i always consumes the stream (seed, i) from _rng, so outputs are
bitwise reproducible across lanes, thread counts, and chunkings.

The joint step follows the order: build the eligible edge set from the
walker's position on the pre-step configuration, Bernoulli(alpha)-select
edges to rewire, re-pair (either a fresh uniform matching of the whole
union when the selection is at least half of the rest, or partner draws
without replacement), set the per-half-edge rewired flags for the
selected edges, test the walker's flag, then make the walk move on the
updated configuration.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

from . import _backend
from ._rng import ReplicaRng

MODE_LOCAL = 0
MODE_NEAR = 1
MODE_GLOBAL = 2

_MODE_CODES = {"local": MODE_LOCAL, "near": MODE_NEAR, "global": MODE_GLOBAL}

_U = np.uint64
_GOLD = _U(0x9E3779B97F4A7C15)
_MIX1 = _U(0xBF58476D1CE4E5B9)
_MIX2 = _U(0x94D049BB133111EB)
_INV_2_53 = 1.0 / 9007199254740992.0
_S30 = _U(30)
_S27 = _U(27)
_S31 = _U(31)
_S11 = _U(11)
_S17 = _U(17)
_S47 = _U(47)
_S49 = _U(49)
_S15 = _U(15)
_S21 = _U(21)
_S28 = _U(28)
_S36 = _U(36)
_U0 = _U(0)
_U1 = _U(1)


# ---------------------------------------------------------------------------
# RNG primitives (numba lane); mirrors _rng.ReplicaRng exactly.
# ---------------------------------------------------------------------------

@njit(cache=True)
def _mix64(z):
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@njit(cache=True)
def _rng_init(state, seed, replica):
    base = seed + (_U(replica) + _U1) * _GOLD
    s0 = _mix64(base + _GOLD)
    s1 = _mix64(base + _GOLD + _GOLD)
    if s0 == _U0 and s1 == _U0:
        s1 = _GOLD
    state[0] = s0
    state[1] = s1


@njit(cache=True)
def _rng_next(state):
    s0 = state[0]
    s1 = state[1]
    ss = s0 + s1
    result = ((ss << _S17) | (ss >> _S47)) + s0
    s1 = s1 ^ s0
    state[0] = ((s0 << _S49) | (s0 >> _S15)) ^ s1 ^ (s1 << _S21)
    state[1] = (s1 << _S28) | (s1 >> _S36)
    return result


@njit(cache=True)
def _rng_uniform(state):
    return np.float64(_rng_next(state) >> _S11) * _INV_2_53


@njit(cache=True)
def _rng_below(state, n):
    # Unbiased integer in [0, n); n == 1 consumes no randomness.
    if n <= 1:
        return np.int64(0)
    un = _U(n)
    t = (_U0 - un) % un
    while True:
        x = _rng_next(state)
        if x >= t:
            return np.int64(x % un)


@njit(cache=True)
def _rng_bernoulli(state, p):
    return _rng_uniform(state) < p


@njit(cache=True)
def _float_pow(base, e):
    acc = 1.0
    b = base
    while e > 0:
        if e & 1:
            acc *= b
        b *= b
        e >>= 1
    return acc


@njit(cache=True)
def _rng_binomial(state, m, p):
    if m <= 0:
        return np.int64(0)
    if p <= 0.0:
        return np.int64(0)
    if p >= 1.0:
        return np.int64(m)
    q0 = _float_pow(1.0 - p, m)
    if q0 > 0.0:
        ratio = p / (1.0 - p)
        u = _rng_uniform(state)
        k = np.int64(0)
        q = q0
        c = q0
        while u > c and k < m:
            k += 1
            q = q * ratio * (m - k + 1) / k
            c += q
        return k
    k = np.int64(0)
    for _ in range(m):
        if _rng_uniform(state) < p:
            k += 1
    return k


@njit(cache=True)
def _rng_shuffle(state, arr, n):
    for i in range(n - 1, 0, -1):
        j = _rng_below(state, i + 1)
        tmp = arr[i]
        arr[i] = arr[j]
        arr[j] = tmp


# ---------------------------------------------------------------------------
# BFS ball of non-backtracking positions at offsets 0..r-1 (numba lane).
# ---------------------------------------------------------------------------

@njit(cache=True)
def _bfs_ball(pairing, v_of, vstart, x, r, stamp, queue, token):
    stamp[x] = token
    queue[0] = x
    count = 1
    level_start = 0
    for _depth in range(1, r):
        level_end = count
        if level_start == level_end:
            break
        for qi in range(level_start, level_end):
            p = queue[qi]
            q = pairing[p]
            v = v_of[q]
            for h in range(vstart[v], vstart[v + 1]):
                if h == q:
                    continue
                if stamp[h] != token:
                    stamp[h] = token
                    queue[count] = h
                    count += 1
        level_start = level_end
    return count


# ---------------------------------------------------------------------------
# Joint walk + rewiring replica batch (numba lane).
# ---------------------------------------------------------------------------

@njit(cache=True, parallel=True)
def _tau_batch_nb(pairing_master, v_of, vstart, mode, alpha, r, t_max,
                  n_rep, seed, annealed, x0, stop_at_tau, n_chunks):
    H = pairing_master.shape[0]
    m_edges = H // 2
    tau_out = np.empty(n_rep, np.int64)
    xfin_out = np.empty(n_rep, np.int64)
    for c in prange(n_chunks):
        lo = c * n_rep // n_chunks
        hi = (c + 1) * n_rep // n_chunks
        if hi <= lo:
            continue
        pairing = pairing_master.copy()
        flags = np.zeros(H, np.uint8)
        dedup = np.zeros(H, np.int64)
        used = np.zeros(H, np.int64)
        bstamp = np.zeros(H, np.int64)
        queue = np.empty(H, np.int64)
        sel = np.empty(H + 2, np.int64)
        par = np.empty(H + 2, np.int64)
        perm = np.empty(H, np.int64)
        undo_pos = np.empty(H + 1, np.int64)
        undo_val = np.empty(H + 1, np.int64)
        fundo = np.empty(H + 1, np.int64)
        state = np.empty(2, np.uint64)
        token = np.int64(0)
        for rep in range(lo, hi):
            _rng_init(state, seed, rep)
            nundo = 0
            nf = 0
            dirty = False
            if annealed:
                for i in range(H):
                    perm[i] = i
                _rng_shuffle(state, perm, H)
                for i in range(0, H, 2):
                    a = perm[i]
                    b = perm[i + 1]
                    pairing[a] = b
                    pairing[b] = a
                for i in range(H):
                    flags[i] = 0
                dirty = True  # pairing is resampled per replica; never restored
                x = _rng_below(state, H)
            else:
                x = x0
            tau = t_max + 1
            for t in range(1, t_max + 1):
                # phase 1: eligible set + Bernoulli selection
                nsel = 0
                token += 1
                utok = token
                if mode == MODE_LOCAL:
                    if alpha > 0.0 and _rng_bernoulli(state, alpha):
                        a = x
                        b = pairing[x]
                        if b < a:
                            a, b = b, a
                        used[a] = utok
                        sel[0] = a
                        sel[1] = b
                        nsel = 1
                elif mode == MODE_GLOBAL:
                    k = _rng_binomial(state, m_edges, alpha)
                    while nsel < k:
                        h = _rng_below(state, H)
                        a = h
                        b = pairing[h]
                        if b < a:
                            a, b = b, a
                        if used[a] == utok:
                            continue
                        used[a] = utok
                        sel[2 * nsel] = a
                        sel[2 * nsel + 1] = b
                        nsel += 1
                elif alpha > 0.0:  # MODE_NEAR (alpha = 0 selects nothing, no draws)
                    token += 1
                    btok = token
                    token += 1
                    dtok = token
                    cnt = _bfs_ball(pairing, v_of, vstart, x, r, bstamp, queue, btok)
                    for qi in range(cnt):
                        p = queue[qi]
                        q = pairing[p]
                        if p < q:
                            a, b = p, q
                        else:
                            a, b = q, p
                        if dedup[a] == dtok:
                            continue
                        dedup[a] = dtok
                        if _rng_bernoulli(state, alpha):
                            used[a] = utok
                            sel[2 * nsel] = a
                            sel[2 * nsel + 1] = b
                            nsel += 1
                # phase 2: re-pair
                if nsel > 0:
                    if nsel >= m_edges - nsel:
                        # fresh uniform matching of the whole edge union
                        for i in range(H):
                            perm[i] = i
                        _rng_shuffle(state, perm, H)
                        dirty = True
                        for i in range(0, H, 2):
                            a = perm[i]
                            b = perm[i + 1]
                            pairing[a] = b
                            pairing[b] = a
                    else:
                        npar = 0
                        while npar < nsel:
                            h = _rng_below(state, H)
                            a = h
                            b = pairing[h]
                            if b < a:
                                a, b = b, a
                            if used[a] == utok:
                                continue
                            used[a] = utok
                            par[2 * npar] = a
                            par[2 * npar + 1] = b
                            npar += 1
                        k2 = 2 * nsel
                        _rng_shuffle(state, sel, k2)
                        _rng_shuffle(state, par, k2)
                        if not dirty and nundo + 2 * k2 > H:
                            dirty = True
                        for i in range(k2):
                            u = sel[i]
                            w = par[i]
                            if not dirty:
                                undo_pos[nundo] = u
                                undo_val[nundo] = pairing[u]
                                nundo += 1
                                undo_pos[nundo] = w
                                undo_val[nundo] = pairing[w]
                                nundo += 1
                            pairing[u] = w
                            pairing[w] = u
                    # phase 3: rewired flags for the selected edges
                    for i in range(2 * nsel):
                        hh = sel[i]
                        if flags[hh] == 0:
                            if not dirty:
                                fundo[nf] = hh
                                nf += 1
                            flags[hh] = 1
                # phase 4: stopping-time test (after rewiring, before the move)
                if tau > t_max and flags[x] == 1:
                    tau = t
                    if stop_at_tau:
                        break
                # phase 5: walk move on the updated configuration
                q = pairing[x]
                v = v_of[q]
                base = vstart[v]
                d = vstart[v + 1] - base - 1
                j = _rng_below(state, d)
                pos = base + j
                if pos >= q:
                    pos += 1
                x = pos
            tau_out[rep] = tau
            xfin_out[rep] = x
            if not annealed:
                if dirty:
                    for i in range(H):
                        pairing[i] = pairing_master[i]
                    for i in range(H):
                        flags[i] = 0
                else:
                    for i in range(nundo - 1, -1, -1):
                        pairing[undo_pos[i]] = undo_val[i]
                    for i in range(nf):
                        flags[fundo[i]] = 0
    return tau_out, xfin_out


# ---------------------------------------------------------------------------
# Short-cut audit batch: static walk, vertex-SAW check, S matrix, chi.
# ---------------------------------------------------------------------------

@njit(cache=True, parallel=True)
def _chi_batch_nb(pairing_master, v_of, vstart, r, t, n_rep, seed,
                  annealed, x0, n_chunks):
    H = pairing_master.shape[0]
    n_vert = vstart.shape[0] - 1
    chi_out = np.zeros(n_rep, np.int64)
    skip_out = np.zeros(n_rep, np.uint8)
    for c in prange(n_chunks):
        lo = c * n_rep // n_chunks
        hi = (c + 1) * n_rep // n_chunks
        if hi <= lo:
            continue
        pairing = pairing_master.copy()
        perm = np.empty(H, np.int64)
        path = np.empty(t + 1, np.int64)
        vstamp = np.zeros(n_vert, np.int64)
        vindex = np.empty(n_vert, np.int64)
        estamp = np.zeros(H, np.int64)
        bstamp = np.zeros(n_vert, np.int64)
        vqueue = np.empty(n_vert, np.int64)
        S = np.zeros((t + 1, t + 1), np.uint8)
        state = np.empty(2, np.uint64)
        vs_tok = np.int64(0)
        bs_tok = np.int64(0)
        for rep in range(lo, hi):
            _rng_init(state, seed, rep)
            if annealed:
                for i in range(H):
                    perm[i] = i
                _rng_shuffle(state, perm, H)
                for i in range(0, H, 2):
                    a = perm[i]
                    b = perm[i + 1]
                    pairing[a] = b
                    pairing[b] = a
                x = _rng_below(state, H)
            else:
                x = x0
            path[0] = x
            pos = x
            for s in range(1, t + 1):
                q = pairing[pos]
                v = v_of[q]
                base = vstart[v]
                d = vstart[v + 1] - base - 1
                j = _rng_below(state, d)
                p2 = base + j
                if p2 >= q:
                    p2 += 1
                pos = p2
                path[s] = pos
            # vertex-level self-avoidance
            vs_tok += 1
            saw = True
            for s in range(t + 1):
                v = v_of[path[s]]
                if vstamp[v] == vs_tok:
                    saw = False
                    break
                vstamp[v] = vs_tok
                vindex[v] = s
            if not saw:
                skip_out[rep] = 1
                continue
            # walk-path edges are excluded from short-cut routes
            for s in range(1, t + 1):
                a = path[s - 1]
                b = pairing[a]
                e = a if a < b else b
                estamp[e] = vs_tok
            for i in range(t + 1):
                for j2 in range(t + 1):
                    S[i, j2] = 0
            for k in range(1, t + 1):
                u = v_of[path[k]]
                bs_tok += 1
                bstamp[u] = bs_tok
                vqueue[0] = u
                cnt = 1
                level_start = 0
                for _depth in range(1, r + 1):
                    level_end = cnt
                    if level_start == level_end:
                        break
                    for qi in range(level_start, level_end):
                        w = vqueue[qi]
                        for h in range(vstart[w], vstart[w + 1]):
                            b = pairing[h]
                            e = h if h < b else b
                            if estamp[e] == vs_tok:
                                continue
                            w2 = v_of[b]
                            if bstamp[w2] != bs_tok:
                                bstamp[w2] = bs_tok
                                vqueue[cnt] = w2
                                cnt += 1
                                if vstamp[w2] == vs_tok:
                                    S[k, vindex[w2]] = 1
                    level_start = level_end
            chi_out[rep] = _chi_from_s_nb(S, r, t)
    return chi_out, skip_out


@njit(cache=True)
def _chi_from_s_nb(S, r, t):
    head = t - r if t > r else 0
    chi = np.int64(0)
    for i in range(1, head + 1):
        for l in range(i + 1, i + r + 1):
            for k in range(1, i):
                chi += S[k, l]
    for i in range(head + 1, t + 1):
        for l in range(i + 1, t + 1):
            for k in range(1, i):
                chi += S[k, l]
    return chi


# ---------------------------------------------------------------------------
# Python reference lane (bit-identical draws via ReplicaRng).
# ---------------------------------------------------------------------------

def bfs_ball_py(pairing, v_of, vstart, x, r):
    """Half-edge positions reachable in 0..r-1 non-backtracking steps,
    in BFS discovery order."""
    stamp = set([x])
    queue = [x]
    level_start = 0
    for _depth in range(1, r):
        level_end = len(queue)
        if level_start == level_end:
            break
        for qi in range(level_start, level_end):
            p = queue[qi]
            q = int(pairing[p])
            v = int(v_of[q])
            for h in range(int(vstart[v]), int(vstart[v + 1])):
                if h == q or h in stamp:
                    continue
                stamp.add(h)
                queue.append(h)
        level_start = level_end
    return queue


def _walk_move_py(pairing, v_of, vstart, x, rng):
    q = int(pairing[x])
    v = int(v_of[q])
    base = int(vstart[v])
    d = int(vstart[v + 1]) - base - 1
    j = rng.rand_below(d)
    pos = base + j
    if pos >= q:
        pos += 1
    return pos


def sim_step_py(pairing, flags, v_of, vstart, mode, alpha, r, x, rng,
                record=None):
    """One joint step on mutable (pairing, flags); returns (I_t, new_x).

    Draw order matches the compiled kernel exactly. When `record` is a
    dict it receives the selected edges and the branch used.
    """
    H = len(pairing)
    m_edges = H // 2
    selected: list[tuple[int, int]] = []
    used: set[int] = set()
    if mode == MODE_LOCAL:
        if alpha > 0.0 and rng.bernoulli(alpha):
            a, b = x, int(pairing[x])
            if b < a:
                a, b = b, a
            used.add(a)
            selected.append((a, b))
    elif mode == MODE_GLOBAL:
        k = rng.binomial(m_edges, alpha)
        while len(selected) < k:
            h = rng.rand_below(H)
            a, b = h, int(pairing[h])
            if b < a:
                a, b = b, a
            if a in used:
                continue
            used.add(a)
            selected.append((a, b))
    elif mode == MODE_NEAR:
        if alpha > 0.0:  # alpha = 0 selects nothing and must consume no draws
            ball = bfs_ball_py(pairing, v_of, vstart, x, r)
            seen: set[int] = set()
            for p in ball:
                q = int(pairing[p])
                a, b = (p, q) if p < q else (q, p)
                if a in seen:
                    continue
                seen.add(a)
                if rng.bernoulli(alpha):
                    used.add(a)
                    selected.append((a, b))
    else:
        raise ValueError(f"unknown mode code {mode}")

    branch = None
    nsel = len(selected)
    if nsel > 0:
        if nsel >= m_edges - nsel:
            branch = "resample-union"
            perm = np.arange(H, dtype=np.int64)
            rng.shuffle(perm)
            a = perm[0::2]
            b = perm[1::2]
            pairing[a] = b
            pairing[b] = a
        else:
            branch = "draw-partners"
            partners: list[tuple[int, int]] = []
            while len(partners) < nsel:
                h = rng.rand_below(H)
                a, b = h, int(pairing[h])
                if b < a:
                    a, b = b, a
                if a in used:
                    continue
                used.add(a)
                partners.append((a, b))
            sel_list = [h for e in selected for h in e]
            par_list = [h for e in partners for h in e]
            rng.shuffle(sel_list)
            rng.shuffle(par_list)
            for u, w in zip(sel_list, par_list):
                pairing[u] = w
                pairing[w] = u
        for a, b in selected:
            flags[a] = 1
            flags[b] = 1
    if record is not None:
        record["selected"] = list(selected)
        record["branch"] = branch
    i_t = int(flags[x])
    new_x = _walk_move_py(pairing, v_of, vstart, x, rng)
    return i_t, new_x


def _sample_pairing_py(H, rng):
    perm = np.arange(H, dtype=np.int64)
    rng.shuffle(perm)
    pairing = np.empty(H, dtype=np.int64)
    a = perm[0::2]
    b = perm[1::2]
    pairing[a] = b
    pairing[b] = a
    return pairing


def _tau_batch_py(pairing_master, v_of, vstart, mode, alpha, r, t_max,
                  n_rep, seed, annealed, x0, stop_at_tau):
    H = pairing_master.shape[0]
    tau_out = np.empty(n_rep, np.int64)
    xfin_out = np.empty(n_rep, np.int64)
    for rep in range(n_rep):
        rng = ReplicaRng(seed, rep)
        if annealed:
            pairing = _sample_pairing_py(H, rng)
            x = rng.rand_below(H)
        else:
            pairing = pairing_master.copy()
            x = x0
        flags = np.zeros(H, np.uint8)
        tau = t_max + 1
        for t in range(1, t_max + 1):
            i_t, new_x = sim_step_py(pairing, flags, v_of, vstart, mode,
                                     alpha, r, x, rng)
            if tau > t_max and i_t == 1:
                tau = t
                if stop_at_tau:
                    break
            x = new_x
        tau_out[rep] = tau
        xfin_out[rep] = x
    return tau_out, xfin_out


def static_path_py(pairing, v_of, vstart, x, t, rng):
    path = np.empty(t + 1, dtype=np.int64)
    path[0] = x
    pos = x
    for s in range(1, t + 1):
        pos = _walk_move_py(pairing, v_of, vstart, pos, rng)
        path[s] = pos
    return path


def _chi_batch_py(pairing_master, v_of, vstart, r, t, n_rep, seed,
                  annealed, x0):
    from .estimators import shortcut_audit_arrays  # local import, no cycle at call time

    H = pairing_master.shape[0]
    chi_out = np.zeros(n_rep, np.int64)
    skip_out = np.zeros(n_rep, np.uint8)
    for rep in range(n_rep):
        rng = ReplicaRng(seed, rep)
        if annealed:
            pairing = _sample_pairing_py(H, rng)
            x = rng.rand_below(H)
        else:
            pairing = pairing_master
            x = x0
        path = static_path_py(pairing, v_of, vstart, x, t, rng)
        s_mat, chi, skipped = shortcut_audit_arrays(pairing, v_of, vstart, path, r)
        if skipped:
            skip_out[rep] = 1
        else:
            chi_out[rep] = chi
    return chi_out, skip_out


# ---------------------------------------------------------------------------
# Dispatchers.
# ---------------------------------------------------------------------------

def _n_chunks() -> int:
    import numba

    return max(1, numba.get_num_threads())


def tau_batch(pairing, v_of, vstart, mode: str, alpha: float, r: int,
              t_max: int, n_rep: int, seed: int, annealed: bool,
              x0: int = 0, stop_at_tau: bool = True,
              backend: str | None = None):
    """Run n_rep joint replicas; returns (tau, x_final) int64 arrays.

    tau[i] is the realized stopping time of replica i, or t_max + 1 if
    the walk never crossed a rewired edge within the horizon. x_final is
    the position after t_max steps (only meaningful without early stop).
    """
    mcode = _MODE_CODES[mode]
    lane = _backend.resolve_backend(backend)
    seed_u = np.uint64(int(seed) & ((1 << 64) - 1))
    if lane == "numba":
        return _tau_batch_nb(pairing, v_of, vstart, mcode, float(alpha),
                             int(r), int(t_max), int(n_rep), seed_u,
                             bool(annealed), int(x0), bool(stop_at_tau),
                             _n_chunks())
    return _tau_batch_py(pairing, v_of, vstart, mcode, float(alpha), int(r),
                         int(t_max), int(n_rep), int(seed) & ((1 << 64) - 1),
                         bool(annealed), int(x0), bool(stop_at_tau))


def chi_batch(pairing, v_of, vstart, r: int, t: int, n_rep: int, seed: int,
              annealed: bool, x0: int = 0, backend: str | None = None):
    """Static-walk short-cut audit over replicas; returns (chi, skipped)."""
    lane = _backend.resolve_backend(backend)
    seed_u = np.uint64(int(seed) & ((1 << 64) - 1))
    if lane == "numba":
        return _chi_batch_nb(pairing, v_of, vstart, int(r), int(t),
                             int(n_rep), seed_u, bool(annealed), int(x0),
                             _n_chunks())
    return _chi_batch_py(pairing, v_of, vstart, int(r), int(t), int(n_rep),
                         int(seed) & ((1 << 64) - 1), bool(annealed), int(x0))
