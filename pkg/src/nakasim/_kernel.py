"""Compiled core shared by the chain store, the protocol engine and the walk oracle.

Blocks live in one int64 table with a column per field plus a parallel
uint64 array of digest keys. Everything here works on those arrays so the
same code path serves step-by-step Python use and long batch runs.
"""

import numpy as np
from numba import njit

# block table layout
PARENT, MINER, ROUND, VDF, DEPTH, HONEST, HCOUNT, OK = range(8)
NCOL = 8
GENESIS = 0
NO_BLOCK = -1

# strategy codes
UNIFORM, FIRST_SEEN, LEX_FIRST, GLOBAL_COIN = 0, 1, 2, 3
# adversary codes
ADV_NONE, ADV_PRIVATE, ADV_SELECTIVE, ADV_LEXGRIND, ADV_FSSPLIT = 0, 1, 2, 3, 4

# config vector
C_N, C_B, C_STRAT, C_ADV, C_RELAY, C_VDF, C_TIE, C_GRIND = range(8)
NCFG = 8

# scalar state vector
(S_SIZE, S_MAX, S_MLN, S_NADV, S_J, S_LAST, S_PRIV, S_REL,
 S_BCN, S_EVN, S_EVOVF, S_STAMP) = range(12)
NSC = 12

# kinds of nonempty round, used by the assumption trigger
KIND_NONE, KIND_HONEST, KIND_CORRUPT, KIND_MIXED = 0, 1, 2, 3

# per-round record columns
(R_T, R_NB, R_AB, R_CP, R_INC, R_N, R_J, R_HMAX, R_HMIN, R_AMAX,
 R_PTIP, R_PHON, R_NLONG, R_REL, R_REJ, R_FLAG) = range(16)
NREC = 16
RECORD_COLUMNS = (
    "t", "NB", "AB", "common_prefix_len", "max_inconsistency", "N", "J",
    "honest_max_len", "honest_min_len", "adv_max_len", "prefix_tip",
    "prefix_honest", "n_longest", "releases", "rejected", "assumption_flag",
)

# event log
EV_RELEASE, EV_REJECT, EV_RELAY = 1, 2, 3
NEV = 5
REJ_STRUCT, REJ_FUTURE = 1, 2

ICAP = 8  # adversary messages a node can hold per round

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
GENESIS_KEY = np.uint64(0x6A09E667F3BCC908)


@njit(cache=True)
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def block_key(parent_key, miner, rnd, salt):
    h = mix64(parent_key ^ (np.uint64(miner + 2) * _GOLDEN))
    h = mix64(h ^ (np.uint64(rnd) * _M1 + _GOLDEN))
    return mix64(h ^ (np.uint64(salt) * _M2 + _M1))


@njit(cache=True)
def coin_priority(coin_key, epoch, key):
    return mix64(mix64(coin_key ^ (np.uint64(epoch) * _GOLDEN)) ^ key)


@njit(cache=True)
def insert_block(blk, keys, size, parent, miner, rnd, honest, vdf, salt):
    """Append a block without checks; returns its id."""
    i = size
    d = blk[parent, DEPTH] + 1
    blk[i, PARENT] = parent
    blk[i, MINER] = miner
    blk[i, ROUND] = rnd
    blk[i, VDF] = vdf
    blk[i, DEPTH] = d
    blk[i, HONEST] = honest
    blk[i, HCOUNT] = blk[parent, HCOUNT] + honest
    # structural part of the gate: strictly increasing, no stale output
    if parent == GENESIS:
        ok = vdf >= 0
    else:
        ok = blk[parent, OK] == 1 and vdf > blk[parent, VDF] and vdf >= d - 2
    blk[i, OK] = 1 if ok else 0
    keys[i] = block_key(keys[parent], miner, rnd, salt)
    return i


@njit(cache=True)
def prefix_tip(blk, tips, k):
    """Deepest common ancestor of tips[:k]."""
    cur = tips[:k].copy()
    dmin = blk[cur[0], DEPTH]
    for i in range(1, k):
        if blk[cur[i], DEPTH] < dmin:
            dmin = blk[cur[i], DEPTH]
    for i in range(k):
        while blk[cur[i], DEPTH] > dmin:
            cur[i] = blk[cur[i], PARENT]
    while True:
        same = True
        for i in range(1, k):
            if cur[i] != cur[0]:
                same = False
                break
        if same:
            return cur[0]
        for i in range(k):
            cur[i] = blk[cur[i], PARENT]


@njit(cache=True)
def choose_index(strategy, cands, k, keys, epoch, coin_key):
    """Index into cands[:k] (arrival order) for the deterministic strategies.

    UniformRandom is drawn at the call site: handing a Generator to a helper
    costs more than the rest of a node's round.
    """
    if k == 1 or strategy == FIRST_SEEN:
        return 0
    best = 0
    if strategy == LEX_FIRST:
        bk = keys[cands[0]]
        for i in range(1, k):
            if keys[cands[i]] < bk:
                bk = keys[cands[i]]
                best = i
        return best
    bk = coin_priority(coin_key, epoch, keys[cands[0]])
    for i in range(1, k):
        v = coin_priority(coin_key, epoch, keys[cands[i]])
        if v < bk:
            bk = v
            best = i
    return best


@njit(cache=True)
def note_block(blk, sc, maxlayer, i, vdf_on):
    """Track the layer of deepest acceptable blocks."""
    if vdf_on and blk[i, OK] == 0:
        return
    d = blk[i, DEPTH]
    if d > sc[S_MAX]:
        sc[S_MAX] = d
        sc[S_MLN] = 0
    if d == sc[S_MAX]:
        maxlayer[sc[S_MLN]] = i
        sc[S_MLN] += 1


@njit(cache=True)
def acceptable(blk, c, t, vdf_on):
    if not vdf_on:
        return True
    return blk[c, OK] == 1 and blk[c, VDF] <= t - 1


@njit(cache=True)
def log_event(ev, sc, t, kind, node, tip, info):
    if ev.shape[0] == 0:
        return
    k = sc[S_EVN]
    if k >= ev.shape[0]:
        sc[S_EVOVF] = 1
        return
    ev[k, 0] = t
    ev[k, 1] = kind
    ev[k, 2] = node
    ev[k, 3] = tip
    ev[k, 4] = info
    sc[S_EVN] = k + 1


@njit(cache=True)
def _push(nxt_inb, nxt_inb_n, ev, sc, t, i, c):
    k = nxt_inb_n[i]
    if k < nxt_inb.shape[1]:
        nxt_inb[i, k] = c
        nxt_inb_n[i] = k + 1
        log_event(ev, sc, t, EV_RELEASE, i, c, k + 1)
        return 1
    return 0


@njit(cache=True)
def adv_mine(cfg, t, succ, blk, keys, sc, maxlayer, base, base_n, store_max_prev,
             trig, rng, newadv, tmp):
    """Place corrupt blocks of round t. Returns (number created, trigger flag)."""
    n = cfg[C_N]
    b = cfg[C_B]
    adv = cfg[C_ADV]
    vdf_on = cfg[C_VDF] == 1
    flag = 0
    pick = NO_BLOCK
    if trig:
        m = 0
        for j in range(base_n):
            if blk[base[j], HONEST] == 1 and base[j] != GENESIS:
                tmp[m] = base[j]
                m += 1
        if m > 0:
            pick = tmp[rng.integers(0, m)]
            flag = 1
        else:
            pick = base[rng.integers(0, base_n)]
            flag = 2
    made = 0
    if adv == ADV_PRIVATE or adv == ADV_SELECTIVE:
        par = sc[S_PRIV]
        if pick != NO_BLOCK:
            par = pick
        elif blk[par, DEPTH] < store_max_prev:
            par = base[rng.integers(0, base_n)]
        for m in range(n - b, n):
            if succ[m] == 0:
                continue
            sz = sc[S_SIZE]
            insert_block(blk, keys, sz, par, m, t, 0, t - 1, 0)
            sc[S_SIZE] = sz + 1
            note_block(blk, sc, maxlayer, sz, vdf_on)
            newadv[made] = sz
            made += 1
            par = sz
            if vdf_on:
                break
        sc[S_PRIV] = par
    elif adv == ADV_LEXGRIND:
        ncand = 0
        if pick != NO_BLOCK:
            tmp[0] = pick
            ncand = 1
        else:
            for j in range(base_n):
                tmp[j] = base[j]
            ncand = base_n
        last = sc[S_PRIV]
        for m in range(n - b, n):
            if succ[m] == 0:
                continue
            bestc = tmp[0]
            bests = 0
            bestk = block_key(keys[bestc], m, t, 0)
            for j in range(ncand):
                for s in range(cfg[C_GRIND]):
                    k = block_key(keys[tmp[j]], m, t, s)
                    if k < bestk:
                        bestk = k
                        bestc = tmp[j]
                        bests = s
            sz = sc[S_SIZE]
            insert_block(blk, keys, sz, bestc, m, t, 0, t - 1, bests)
            sc[S_SIZE] = sz + 1
            note_block(blk, sc, maxlayer, sz, vdf_on)
            newadv[made] = sz
            made += 1
            last = sz
            tmp[0] = sz
            ncand = 1
            if vdf_on:
                break
        sc[S_PRIV] = last
    elif adv == ADV_FSSPLIT:
        par = pick
        if par == NO_BLOCK:
            par = base[rng.integers(0, base_n)]
        for m in range(n - b, n):
            if succ[m] == 0:
                continue
            sz = sc[S_SIZE]
            insert_block(blk, keys, sz, par, m, t, 0, t - 1, 0)
            sc[S_SIZE] = sz + 1
            note_block(blk, sc, maxlayer, sz, vdf_on)
            newadv[made] = sz
            made += 1
        if made > 0:
            sc[S_PRIV] = newadv[0]
    return made, flag


@njit(cache=True)
def adv_release(cfg, t, blk, sc, tips, newadv, made, bc_new, bc_new_n,
                nxt_inb, nxt_inb_n, ev):
    """Decide what the rushing adversary delivers for round t+1."""
    n = cfg[C_N]
    b = cfg[C_B]
    h = n - b
    adv = cfg[C_ADV]
    hmax = 0
    for i in range(h):
        if blk[tips[i], DEPTH] > hmax:
            hmax = blk[tips[i], DEPTH]
    P = sc[S_PRIV]
    dP = blk[P, DEPTH]
    sent = 0
    if adv == ADV_PRIVATE:
        if P != GENESIS and P != sc[S_REL] and (dP > hmax or (cfg[C_TIE] == 1 and dP == hmax)):
            for i in range(h):
                sent += _push(nxt_inb, nxt_inb_n, ev, sc, t, i, P)
            sc[S_REL] = P
    elif adv == ADV_SELECTIVE:
        if P != GENESIS and P != sc[S_REL] and dP >= hmax:
            Q = blk[P, PARENT]
            if Q == GENESIS:
                Q = P
            half = (h + 1) // 2
            for i in range(h):
                sent += _push(nxt_inb, nxt_inb_n, ev, sc, t, i, P if i < half else Q)
            sc[S_REL] = P
    elif adv == ADV_LEXGRIND:
        if P != GENESIS and P != sc[S_REL] and dP >= hmax:
            for i in range(h):
                sent += _push(nxt_inb, nxt_inb_n, ev, sc, t, i, P)
            sc[S_REL] = P
    elif adv == ADV_FSSPLIT:
        A = NO_BLOCK
        B = NO_BLOCK
        for j in range(made):
            c = newadv[j]
            if blk[c, DEPTH] >= hmax:
                if A == NO_BLOCK:
                    A = c
                elif B == NO_BLOCK:
                    B = c
        if B == NO_BLOCK:
            # reorder honest blocks of this round to force a split
            for j in range(bc_new_n):
                c = bc_new[j]
                if c == A:
                    continue
                if A == NO_BLOCK:
                    if blk[c, DEPTH] >= hmax:
                        A = c
                elif blk[c, DEPTH] == blk[A, DEPTH]:
                    B = c
                    break
        if A != NO_BLOCK and B != NO_BLOCK:
            half = (h + 1) // 2
            for i in range(h):
                if i < half:
                    sent += _push(nxt_inb, nxt_inb_n, ev, sc, t, i, A)
                    sent += _push(nxt_inb, nxt_inb_n, ev, sc, t, i, B)
                else:
                    sent += _push(nxt_inb, nxt_inb_n, ev, sc, t, i, B)
                    sent += _push(nxt_inb, nxt_inb_n, ev, sc, t, i, A)
            sc[S_REL] = A
        elif A != NO_BLOCK and A != sc[S_REL] and blk[A, HONEST] == 0:
            for i in range(h):
                sent += _push(nxt_inb, nxt_inb_n, ev, sc, t, i, A)
            sc[S_REL] = A
    return sent


@njit(cache=True)
def play_round(t, cfg, p, coin_key, mrng, srng, arng,
               blk, keys, sc, tips, bc, inb, inb_n, stamp, maxlayer,
               work, row, ev):
    """Advance one synchronous round. `work` is a (9, cap + 2n + ICAP + 2) scratch block."""
    n = cfg[C_N]
    b = cfg[C_B]
    h = n - b
    strat = cfg[C_STRAT]
    adv = cfg[C_ADV]
    vdf_on = cfg[C_VDF] == 1
    hb = n if adv == ADV_NONE else h
    bc_n = sc[S_BCN]

    cand = work[0]
    relay = work[1]
    succ = work[2]
    base = work[3]
    newadv = work[4]
    tmp = work[5]
    nbc = work[6]
    nxt_inb_n = work[7]
    clong = work[8]
    nxt_inb = np.zeros((n, inb.shape[1]), dtype=np.int64)

    rejected = 0
    n_relay = 0

    # 1. selective relay of strictly longer received chains
    if cfg[C_RELAY] == 1:
        lmax_bc, nlong = _longest(blk, bc, bc_n, t, vdf_on, stamp, sc, clong)
        for i in range(hb):
            own = tips[i]
            lmax = lmax_bc
            for j in range(inb_n[i]):
                c = inb[i, j]
                if blk[c, DEPTH] > lmax and acceptable(blk, c, t, vdf_on):
                    lmax = blk[c, DEPTH]
            if lmax <= blk[own, DEPTH]:
                continue
            sc[S_STAMP] += 1
            st = sc[S_STAMP]
            k = 0
            for j in range(inb_n[i]):
                c = inb[i, j]
                if blk[c, DEPTH] == lmax and stamp[c] != st and acceptable(blk, c, t, vdf_on):
                    stamp[c] = st
                    cand[k] = c
                    k += 1
            if lmax_bc == lmax:
                for j in range(nlong):
                    c = clong[j]
                    if stamp[c] != st:
                        stamp[c] = st
                        cand[k] = c
                        k += 1
            if strat == UNIFORM and k > 1:
                c = cand[srng.integers(0, k)]
            else:
                c = cand[choose_index(strat, cand, k, keys, t, coin_key)]
            tips[i] = c
            dup = False
            for j in range(n_relay):
                if relay[j] == c:
                    dup = True
                    break
            if not dup:
                relay[n_relay] = c
                n_relay += 1
                log_event(ev, sc, t, EV_RELAY, i, c, 0)

    # 2. adopt a longest acceptable chain; broadcasts and relays are shared
    for j in range(n_relay):
        bc[bc_n + j] = relay[j]
    lmax_c, nlong = _longest(blk, bc, bc_n + n_relay, t, vdf_on, stamp, sc, clong)
    n_longest = 0
    for i in range(hb):
        own = tips[i]
        lmax = blk[own, DEPTH]
        if lmax_c > lmax:
            lmax = lmax_c
        for j in range(inb_n[i]):
            c = inb[i, j]
            if acceptable(blk, c, t, vdf_on):
                if blk[c, DEPTH] > lmax:
                    lmax = blk[c, DEPTH]
            else:
                rejected += 1
                reason = REJ_STRUCT if blk[c, OK] == 0 else REJ_FUTURE
                log_event(ev, sc, t, EV_REJECT, i, c, reason)
        sc[S_STAMP] += 1
        st = sc[S_STAMP]
        k = 0
        if blk[own, DEPTH] == lmax:
            cand[0] = own
            stamp[own] = st
            k = 1
        for j in range(inb_n[i]):
            c = inb[i, j]
            if blk[c, DEPTH] == lmax and stamp[c] != st and acceptable(blk, c, t, vdf_on):
                stamp[c] = st
                cand[k] = c
                k += 1
        if lmax_c == lmax:
            for j in range(nlong):
                c = clong[j]
                if stamp[c] != st:
                    stamp[c] = st
                    cand[k] = c
                    k += 1
        if k > n_longest:
            n_longest = k
        if strat == UNIFORM and k > 1:
            tips[i] = cand[srng.integers(0, k)]
        else:
            tips[i] = cand[choose_index(strat, cand, k, keys, t, coin_key)]

    # 3. mining; every node draws exactly one uniform so the mining stream
    # is unaffected by strategy or adversary choices
    NB = 0
    AB = 0
    for i in range(n):
        if mrng.random() < p:
            succ[i] = 1
            if i < h:
                NB += 1
            else:
                AB += 1
        else:
            succ[i] = 0
    base_n = sc[S_MLN]
    for j in range(base_n):
        base[j] = maxlayer[j]
    store_max_prev = sc[S_MAX]

    nb_new = 0
    for i in range(hb):
        if succ[i] == 1:
            sz = sc[S_SIZE]
            insert_block(blk, keys, sz, tips[i], i, t, 1 if i < h else 0, t - 1, 0)
            sc[S_SIZE] = sz + 1
            note_block(blk, sc, maxlayer, sz, vdf_on)
            tips[i] = sz
            nbc[nb_new] = sz
            nb_new += 1

    made = 0
    flag = 0
    sent = 0
    for i in range(n):
        nxt_inb_n[i] = 0
    if adv != ADV_NONE:
        trig = sc[S_NADV] == 0 and sc[S_LAST] == KIND_HONEST
        if AB > 0:
            made, flag = adv_mine(cfg, t, succ, blk, keys, sc, maxlayer, base, base_n,
                                  store_max_prev, trig, arng, newadv, tmp)
        # 4. rushing adversary plans deliveries for the next round
        sent = adv_release(cfg, t, blk, sc, tips, newadv, made, nbc, nb_new,
                           nxt_inb, nxt_inb_n, ev)

    # 5. bookkeeping
    if NB == 0 and AB > 0:
        sc[S_NADV] += 1
    elif NB > 0 and AB == 0:
        if sc[S_NADV] > 0:
            sc[S_NADV] -= 1
    if NB + AB > 0:
        if AB == 0:
            sc[S_J] += 1
            sc[S_LAST] = KIND_HONEST
        elif NB == 0:
            sc[S_J] -= 1
            sc[S_LAST] = KIND_CORRUPT
        else:
            sc[S_LAST] = KIND_MIXED

    sc[S_STAMP] += 1
    st = sc[S_STAMP]
    k = 0
    hmax = 0
    hmin = blk[tips[0], DEPTH]
    for i in range(h):
        c = tips[i]
        d = blk[c, DEPTH]
        if d > hmax:
            hmax = d
        if d < hmin:
            hmin = d
        if stamp[c] != st:
            stamp[c] = st
            cand[k] = c
            k += 1
    pt = prefix_tip(blk, cand, k)
    row[R_T] = t
    row[R_NB] = NB
    row[R_AB] = AB
    row[R_CP] = blk[pt, DEPTH]
    row[R_INC] = hmax - blk[pt, DEPTH]
    row[R_N] = sc[S_NADV]
    row[R_J] = sc[S_J]
    row[R_HMAX] = hmax
    row[R_HMIN] = hmin
    row[R_AMAX] = sc[S_MAX]
    row[R_PTIP] = pt
    row[R_PHON] = blk[pt, HCOUNT]
    row[R_NLONG] = n_longest
    row[R_REL] = sent
    row[R_REJ] = rejected
    row[R_FLAG] = flag

    for j in range(nb_new):
        bc[j] = nbc[j]
    sc[S_BCN] = nb_new
    for i in range(n):
        inb_n[i] = nxt_inb_n[i]
        for j in range(nxt_inb_n[i]):
            inb[i, j] = nxt_inb[i, j]


@njit(cache=True)
def _longest(blk, lst, m, t, vdf_on, stamp, sc, out):
    """Distinct acceptable entries of lst[:m] at maximal depth, in order."""
    lmax = 0
    for j in range(m):
        c = lst[j]
        if blk[c, DEPTH] > lmax and acceptable(blk, c, t, vdf_on):
            lmax = blk[c, DEPTH]
    sc[S_STAMP] += 1
    st = sc[S_STAMP]
    k = 0
    for j in range(m):
        c = lst[j]
        if blk[c, DEPTH] == lmax and stamp[c] != st and acceptable(blk, c, t, vdf_on):
            stamp[c] = st
            out[k] = c
            k += 1
    return lmax, k


@njit(cache=True)
def run_rounds(t0, t1, cfg, p, coin_key, mrng, srng, arng,
               blk, keys, sc, tips, bc, inb, inb_n, stamp, maxlayer, work, rows, ev):
    for t in range(t0, t1 + 1):
        play_round(t, cfg, p, coin_key, mrng, srng, arng, blk, keys, sc, tips, bc,
                   inb, inb_n, stamp, maxlayer, work, rows[t - t0], ev)


# coalescing walks

@njit(cache=True)
def walk_step(pos, alive, rep, n_g, u, rng, occ):
    """One step of system-wide lazy coalescing walks; returns clusters left.

    occ is an int64 scratch array of length n_g filled with -1.
    """
    k = pos.shape[0]
    moved = rng.random() < u
    if moved:
        for i in range(k):
            if alive[i]:
                pos[i] = rng.integers(0, n_g)
    left = 0
    for i in range(k):
        if alive[i]:
            o = occ[pos[i]]
            if o >= 0:
                alive[i] = False
                rep[i] = o
            else:
                occ[pos[i]] = i
                left += 1
    for i in range(k):
        if alive[i]:
            occ[pos[i]] = -1
    for i in range(k):
        r = rep[i]
        while not alive[r]:
            r = rep[r]
        rep[i] = r
        pos[i] = pos[r]
    return left


@njit(cache=True)
def coalescence_batch(n_g, u, k, runs, rng, distinct, cap):
    out = np.empty(runs, dtype=np.int64)
    pos = np.empty(k, dtype=np.int64)
    alive = np.empty(k, dtype=np.bool_)
    rep = np.empty(k, dtype=np.int64)
    occ = np.full(n_g, -1, dtype=np.int64)
    for r in range(runs):
        for i in range(k):
            pos[i] = i if distinct else rng.integers(0, n_g)
            alive[i] = True
            rep[i] = i
        left = _merge_initial(pos, alive, rep, occ)
        steps = 0
        while left > 1 and steps < cap:
            left = walk_step(pos, alive, rep, n_g, u, rng, occ)
            steps += 1
        out[r] = steps
    return out


@njit(cache=True)
def _merge_initial(pos, alive, rep, occ):
    left = 0
    k = pos.shape[0]
    for i in range(k):
        o = occ[pos[i]]
        if o >= 0:
            alive[i] = False
            rep[i] = o
        else:
            occ[pos[i]] = i
            left += 1
    for i in range(k):
        occ[pos[i]] = -1
    return left


@njit(cache=True)
def opportunity_batch(n, b, p, M, reps, rng):
    """J(M) over reps independent mining sequences, counting nonempty rounds only."""
    out = np.empty(reps, dtype=np.int64)
    for r in range(reps):
        m = 0
        J = 0
        while m < M:
            nb = 0
            ab = 0
            for i in range(n):
                if rng.random() < p:
                    if i < n - b:
                        nb += 1
                    else:
                        ab += 1
            if nb + ab == 0:
                continue
            m += 1
            if ab == 0:
                J += 1
            elif nb == 0:
                J -= 1
        out[r] = J
    return out
