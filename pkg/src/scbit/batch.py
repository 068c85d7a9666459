"""Trial-vectorized kernels for Monte Carlo sweeps.

These run many independent trials in lockstep on numpy arrays (one row
per trial) and are bit-exact with the scalar classes in ``engine`` and
``baseline``; the equivalence is asserted by the test suite, including
under injected faults. Scalar classes stay the reference for single runs
and tracing; these kernels exist so 200-trial accuracy and fault sweeps
finish in seconds instead of hours.
"""

import numpy as np

from .streams import encode_sm, encode_tlb, ternary_values

__all__ = [
    "encode_tlb_products",
    "encode_sm_products",
    "draw_fault_schedule",
    "merge_fault_schedules",
    "engine_batch",
    "tree_batch",
    "canceler_batch",
]


def encode_tlb_products(x, y, stream_len, rng):
    """Per-lane ternary product streams for the sequential engine.

    Uses the same child-source layout as ``run_inner_product`` (x lanes
    first, then y lanes), so a batch trial and a scalar run with the same
    source see identical bits.
    """
    k = len(x)
    sources = rng.spawn(2 * k)
    prods = np.zeros((k, stream_len), dtype=np.int8)
    x_terns = [
        ternary_values(encode_tlb(float(x[i]), stream_len, sources[i]))
        for i in range(k)
    ]
    for i in range(k):
        y_tern = ternary_values(encode_tlb(float(y[i]), stream_len, sources[k + i]))
        prods[i] = x_terns[i] * y_tern
    return prods


def encode_sm_products(x, y, stream_len, rng):
    """Per-lane ternary product streams for the adder-tree design."""
    k = len(x)
    sources = rng.spawn(2 * k)
    prods = np.zeros((k, stream_len), dtype=np.int8)
    xs = [encode_sm(float(x[i]), stream_len, sources[i]) for i in range(k)]
    for i in range(k):
        ys = encode_sm(float(y[i]), stream_len, sources[k + i])
        sign = xs[i].sign.bits ^ ys.sign.bits
        mag = xs[i].magnitude.bits & ys.magnitude.bits
        prods[i] = (1 - 2 * sign.astype(np.int8)) * mag.astype(np.int8)
    return prods


def draw_fault_schedule(rng, n_bits, n_cycles, p_flip):
    """Sample the storage-upset model as a sparse flip schedule.

    Every storage bit flips independently with probability ``p_flip`` at
    each main-clock cycle. Sampled as a binomial count plus a uniform
    choice of distinct (cycle, bit) slots, which is distribution-identical
    and keeps the schedule small. Returns (cycles, bits) arrays sorted by
    cycle.
    """
    if not 0.0 <= p_flip <= 1.0:
        raise ValueError("flip probability must lie in [0, 1]")
    total = int(n_bits) * int(n_cycles)
    count = rng.binomial(total, p_flip) if p_flip > 0.0 else 0
    if count == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty.copy()
    flat = np.sort(rng.sample_without_replacement(total, count))
    return flat // n_bits, flat % n_bits


def merge_fault_schedules(schedules):
    """Combine per-trial (cycles, bits) schedules into batch-ready arrays.

    Returns (trials, cycles, bits) sorted by cycle; ``schedules`` may
    contain None entries for fault-free trials.
    """
    trial_ids = []
    cycles = []
    bits = []
    for trial, schedule in enumerate(schedules):
        if schedule is None:
            continue
        cyc, bit = schedule
        if len(cyc) == 0:
            continue
        trial_ids.append(np.full(len(cyc), trial, dtype=np.int64))
        cycles.append(np.asarray(cyc, dtype=np.int64))
        bits.append(np.asarray(bit, dtype=np.int64))
    if not trial_ids:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty.copy(), empty.copy()
    trial_ids = np.concatenate(trial_ids)
    cycles = np.concatenate(cycles)
    bits = np.concatenate(bits)
    order = np.argsort(cycles, kind="stable")
    return trial_ids[order], cycles[order], bits[order]


def _csr_shift(reg, do_in, do_out, dropped):
    """Apply front shift-in / back-fill shift-out per trial.

    ``do_in`` and ``do_out`` are disjoint boolean masks over trials;
    ``dropped`` accumulates carries pushed off the back end.
    """
    shifted_in = np.empty_like(reg)
    shifted_in[:, 0] = 1
    shifted_in[:, 1:] = reg[:, :-1]
    shifted_out = np.empty_like(reg)
    shifted_out[:, :-1] = reg[:, 1:]
    shifted_out[:, -1] = 0
    dropped += do_in * reg[:, -1]
    return np.where(do_in[:, None], shifted_in, np.where(do_out[:, None], shifted_out, reg))


def _check_law(loaded, emitted, carry, inflight, dropped_pos, dropped_neg, where):
    lhs = emitted + carry + inflight
    rhs = loaded - dropped_pos + dropped_neg
    if not np.array_equal(lhs, rhs):
        bad = int(np.argmax(lhs != rhs))
        raise RuntimeError(
            f"conservation violated at {where} (trial {bad}): "
            f"{lhs[bad]} != {rhs[bad]}"
        )


def engine_batch(
    products,
    carry_len,
    cc_enabled=True,
    shift_direction="opposite",
    fault_schedules=None,
    check_conservation=False,
):
    """Run the sequential engine over a batch of trials.

    ``products``: (trials, lanes, cycles) int8 ternary lane products.
    Returns a dict with the emitted bit planes and per-trial counters.
    """
    products = np.asarray(products, dtype=np.int8)
    n_trials, lanes, n_cycles = products.shape
    m = int(carry_len)

    ps = np.zeros((n_trials, lanes), dtype=np.int8)
    ns = np.zeros((n_trials, lanes), dtype=np.int8)
    pc = np.zeros((n_trials, m), dtype=np.int8)
    nc = np.zeros((n_trials, m), dtype=np.int8)
    emitted_p = np.zeros((n_trials, n_cycles), dtype=np.int8)
    emitted_n = np.zeros((n_trials, n_cycles), dtype=np.int8)
    dropped_pos = np.zeros(n_trials, dtype=np.int64)
    dropped_neg = np.zeros(n_trials, dtype=np.int64)
    cc_counts = np.zeros(n_trials, dtype=np.int64)
    no_shift = np.zeros(n_trials, dtype=bool)

    if fault_schedules is not None:
        f_trials, f_cycles, f_bits = fault_schedules
        starts = np.searchsorted(f_cycles, np.arange(n_cycles + 1))
    else:
        starts = None

    if check_conservation:
        loaded = np.zeros(n_trials, dtype=np.int64)
        emitted_sum = np.zeros(n_trials, dtype=np.int64)

    for cycle in range(n_cycles):
        if starts is not None:
            lo, hi = starts[cycle], starts[cycle + 1]
            if hi > lo:
                tr = f_trials[lo:hi]
                bt = f_bits[lo:hi]
                in_pc = bt < m
                pc[tr[in_pc], bt[in_pc]] ^= 1
                nc[tr[~in_pc], bt[~in_pc] - m] ^= 1

        # multiplier outputs for this cycle, loaded into the shift registers
        lane_bits = products[:, :, cycle]
        vp = (lane_bits == 1).astype(np.int8)
        vn = (lane_bits == -1).astype(np.int8)
        ps[:] = vp
        ns[:] = vn[:, ::-1] if shift_direction == "opposite" else vn
        if check_conservation:
            loaded += lane_bits.sum(axis=1, dtype=np.int64)

        for _ in range(lanes):
            # accumulation update from the current fronts
            x = ps[:, 0] - ns[:, 0]
            cp = pc[:, 0]
            cn = nc[:, 0]
            c = cp - cn
            xp1 = x == 1
            xm1 = x == -1
            x0c0 = (x == 0) & (c == 0)
            both0 = (c == 0) & (cp == 0)
            both1 = (c == 0) & (cp == 1)
            cpos = c == 1
            cneg = c == -1
            pc_in = (xp1 & both0) | (xp1 & cpos)
            pc_out = x0c0 | (xm1 & both1) | (xm1 & cpos)
            nc_in = (xm1 & both0) | (xm1 & cneg)
            nc_out = x0c0 | (xp1 & both1) | (xp1 & cneg)
            pc = _csr_shift(pc, pc_in, pc_out, dropped_pos)
            nc = _csr_shift(nc, nc_in, nc_out, dropped_neg)

            # synchronous shift of the input registers with carry canceling
            new_ps = np.zeros_like(ps)
            new_ns = np.zeros_like(ns)
            if lanes > 1:
                movers_p = ps[:, 1:]
                movers_n = ns[:, 1:]
                if not cc_enabled:
                    new_ps[:, :-1] = movers_p
                    new_ns[:, :-1] = movers_n
                else:
                    if shift_direction == "opposite":
                        mask_p = ns[:, ::-1][:, : lanes - 1]
                        mask_n = ps[:, ::-1][:, : lanes - 1]
                    else:
                        mask_p = ns[:, 1:]
                        mask_n = ps[:, 1:]
                    cc_counts += (movers_p & mask_p).sum(axis=1, dtype=np.int64)
                    new_ps[:, :-1] = movers_p & (mask_p ^ 1)
                    new_ns[:, :-1] = movers_n & (mask_n ^ 1)
            ps = new_ps
            ns = new_ns

            if check_conservation:
                carry = pc.sum(axis=1, dtype=np.int64) - nc.sum(axis=1, dtype=np.int64)
                inflight = ps.sum(axis=1, dtype=np.int64) - ns.sum(axis=1, dtype=np.int64)
                _check_law(
                    loaded,
                    emitted_sum,
                    carry,
                    inflight,
                    dropped_pos,
                    dropped_neg,
                    f"cycle {cycle}",
                )

        # output stage: copy carry fronts to the flip-flops, consume them
        zp = pc[:, 0].copy()
        zn = nc[:, 0].copy()
        emitted_p[:, cycle] = zp
        emitted_n[:, cycle] = zn
        pc = _csr_shift(pc, no_shift, zp == 1, dropped_pos)
        nc = _csr_shift(nc, no_shift, zn == 1, dropped_neg)
        if check_conservation:
            emitted_sum += zp.astype(np.int64) - zn.astype(np.int64)
            carry = pc.sum(axis=1, dtype=np.int64) - nc.sum(axis=1, dtype=np.int64)
            inflight = ps.sum(axis=1, dtype=np.int64) - ns.sum(axis=1, dtype=np.int64)
            _check_law(
                loaded,
                emitted_sum,
                carry,
                inflight,
                dropped_pos,
                dropped_neg,
                f"emit {cycle}",
            )

    return {
        "emitted_pos": emitted_p,
        "emitted_neg": emitted_n,
        "dropped_pos": dropped_pos,
        "dropped_neg": dropped_neg,
        "cc_cancellations": cc_counts,
        "residual_pos": pc.sum(axis=1, dtype=np.int64),
        "residual_neg": nc.sum(axis=1, dtype=np.int64),
    }


def tree_batch(products, counter_width, fault_schedules=None):
    """Run the counter-based adder tree over a batch of trials.

    ``products``: (trials, lanes, cycles) int8, lanes a power of two.
    Node storage is a flat (trials, lanes-1) counter array in level-major
    order, matching ``AdderTree.nodes``.
    """
    products = np.asarray(products, dtype=np.int8)
    n_trials, lanes, n_cycles = products.shape
    if lanes < 2 or lanes & (lanes - 1):
        raise ValueError("tree batch needs a power-of-two lane count >= 2")
    width = int(counter_width)
    c_max = 2 ** (width - 1) - 1
    wrap = 1 << width
    half = 1 << (width - 1)

    level_slices = []
    start, size = 0, lanes // 2
    while size >= 1:
        level_slices.append(slice(start, start + size))
        start += size
        size //= 2

    counters = np.zeros((n_trials, lanes - 1), dtype=np.int16)
    emitted = np.zeros((n_trials, n_cycles), dtype=np.int8)
    saturations = np.zeros(n_trials, dtype=np.int64)

    if fault_schedules is not None:
        f_trials, f_cycles, f_bits = fault_schedules
        starts = np.searchsorted(f_cycles, np.arange(n_cycles + 1))
    else:
        starts = None

    for cycle in range(n_cycles):
        if starts is not None:
            lo, hi = starts[cycle], starts[cycle + 1]
            if hi > lo:
                tr = f_trials[lo:hi]
                node = f_bits[lo:hi] // width
                pos = f_bits[lo:hi] % width
                # several flips may hit one counter in a cycle: combine the
                # XOR masks per (trial, node) before sign-extending once
                lin = tr * (lanes - 1) + node
                order = np.argsort(lin, kind="stable")
                lin_sorted = lin[order]
                masks = (np.int64(1) << pos)[order]
                uniq, first = np.unique(lin_sorted, return_index=True)
                combined = np.bitwise_xor.reduceat(masks, first)
                tr_u = uniq // (lanes - 1)
                nd_u = uniq % (lanes - 1)
                raw = counters[tr_u, nd_u].astype(np.int64) & (wrap - 1)
                raw ^= combined
                raw -= (raw >= half) * wrap
                counters[tr_u, nd_u] = raw.astype(np.int16)

        values = products[:, :, cycle].astype(np.int16)
        for sl in level_slices:
            t = values[:, 0::2] + values[:, 1::2] + counters[:, sl]
            z = np.clip(t, -1, 1)
            pending = t - z
            saturations += (np.abs(pending) > c_max).sum(axis=1, dtype=np.int64)
            np.clip(pending, -c_max, c_max, out=pending)
            counters[:, sl] = pending
            values = z
        emitted[:, cycle] = values[:, 0]

    return {
        "emitted": emitted,
        "saturation_events": saturations,
        "residual_sum": counters.sum(axis=1, dtype=np.int64),
    }


def canceler_batch(hold_pos, hold_neg, shift_direction="opposite", cc_enabled=True):
    """Shift-direction experiment kernel.

    Loads the input shift registers from hold-register bit planes, applies
    the lane-wise carry canceling of the load path, then performs K
    delivery/shift steps, recording the front pair handed to the
    accumulation stage before every shift. Returns (delivered_pos,
    delivered_neg, cancellations) with deliveries of shape (trials, K).
    """
    hold_pos = np.asarray(hold_pos, dtype=np.int8)
    hold_neg = np.asarray(hold_neg, dtype=np.int8)
    if hold_pos.shape != hold_neg.shape or hold_pos.ndim != 2:
        raise ValueError("hold bit planes must share a (trials, lanes) shape")
    n_trials, lanes = hold_pos.shape
    cancellations = np.zeros(n_trials, dtype=np.int64)

    if cc_enabled:
        # load path: a lane's (+1, -1) pair annihilates at the canceler
        cancellations += (hold_pos & hold_neg).sum(axis=1, dtype=np.int64)
        ph = hold_pos & (hold_neg ^ 1)
        nh = hold_neg & (hold_pos ^ 1)
    else:
        ph, nh = hold_pos, hold_neg
    ps = ph.copy()
    ns = nh[:, ::-1].copy() if shift_direction == "opposite" else nh.copy()

    delivered_p = np.zeros((n_trials, lanes), dtype=np.int8)
    delivered_n = np.zeros((n_trials, lanes), dtype=np.int8)
    for step in range(lanes):
        delivered_p[:, step] = ps[:, 0]
        delivered_n[:, step] = ns[:, 0]
        new_ps = np.zeros_like(ps)
        new_ns = np.zeros_like(ns)
        if lanes > 1:
            movers_p = ps[:, 1:]
            movers_n = ns[:, 1:]
            if not cc_enabled:
                new_ps[:, :-1] = movers_p
                new_ns[:, :-1] = movers_n
            else:
                if shift_direction == "opposite":
                    mask_p = ns[:, ::-1][:, : lanes - 1]
                    mask_n = ps[:, ::-1][:, : lanes - 1]
                else:
                    mask_p = ns[:, 1:]
                    mask_n = ps[:, 1:]
                cancellations += (movers_p & mask_p).sum(axis=1, dtype=np.int64)
                new_ps[:, :-1] = movers_p & (mask_p ^ 1)
                new_ns[:, :-1] = movers_n & (mask_n ^ 1)
        ps = new_ps
        ns = new_ns
    return delivered_p, delivered_n, cancellations
