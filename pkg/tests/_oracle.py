"""Brute-force scalar reverse-mode oracle for gradient checks.

A deliberately naive tape autodiff: every scalar in the unfolded forward
pass becomes a node, every dependency an explicit edge with its local
derivative, and the backward sweep walks the tape node by node.  The
forward semantics (reset rules, pooled-statistics normalization, the
box-window spike derivative, warmup-discarded mean-square loss) are
rebuilt here from scratch so the fast vectorized implementation is
checked against an independent derivation, not against itself.

Slow on purpose; intended for tiny networks only.
"""

import numpy as np


class Var:
    __slots__ = ("val", "grad", "edges")

    def __init__(self, val, edges=()):
        self.val = float(val)
        self.grad = 0.0
        self.edges = edges


class Tape:
    def __init__(self):
        self.nodes = []

    def var(self, val, edges=()):
        v = Var(val, edges)
        self.nodes.append(v)
        return v

    def const(self, val):
        return self.var(val)

    def add(self, a, b):
        return self.var(a.val + b.val, ((a, 1.0), (b, 1.0)))

    def sub(self, a, b):
        return self.var(a.val - b.val, ((a, 1.0), (b, -1.0)))

    def mul(self, a, b):
        return self.var(a.val * b.val, ((a, b.val), (b, a.val)))

    def scale(self, a, c):
        return self.var(a.val * c, ((a, c),))

    def shift(self, a, c):
        return self.var(a.val + c, ((a, 1.0),))

    def inv_sqrt(self, a):
        v = 1.0 / np.sqrt(a.val)
        return self.var(v, ((a, -0.5 * v ** 3),))

    def spike(self, u, threshold, half_width=0.5):
        fired = 1.0 if u.val >= threshold else 0.0
        window = 1.0 if abs(u.val - threshold) < half_width else 0.0
        return self.var(fired, ((u, window),))

    def mean(self, xs):
        total = xs[0]
        for x in xs[1:]:
            total = self.add(total, x)
        return self.scale(total, 1.0 / len(xs))

    def backward(self, out):
        out.grad = 1.0
        for node in reversed(self.nodes):
            if node.grad != 0.0:
                for parent, d in node.edges:
                    parent.grad += node.grad * d


def _to_vars(tape, array):
    return [[tape.var(v) for v in row] for row in np.atleast_2d(array)]


def oracle_loss_and_grads(weights, taus, gammas, betas, window, targets,
                          masks, *, threshold, reset_mode,
                          normalize_output, warmup, eps=1e-5,
                          half_width=0.5):
    """Loss and parameter gradients of the unfolded training pass.

    Parameters mirror the real network: ``weights[l]`` is (out, in),
    ``taus``/``gammas``/``betas`` are per-layer vectors, ``window`` is
    (B, T, in), ``targets`` is (B, T, out), and ``masks[l]`` is either
    None or the (B, T, w) *scaled* dropout mask actually applied to
    hidden layer ``l``'s spikes.  Normalization always runs in training
    mode: per-channel statistics pooled over batch and time.

    Returns ``(loss, w_grads, tau_grads, gamma_grads, beta_grads)`` with
    gradients as numpy arrays shaped like their parameters.
    """
    window = np.asarray(window, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if window.ndim == 2:
        window = window[None]
    if targets.ndim == 2:
        targets = targets[None]
    t = Tape()
    n_layers = len(weights)
    B, T, _ = window.shape

    w_vars = [_to_vars(t, w) for w in weights]
    tau_vars = [[t.var(v) for v in tau] for tau in taus]
    g_vars = [[t.var(v) for v in g] for g in gammas]
    b_vars = [[t.var(v) for v in b] for b in betas]

    # act[b][ti] is the list of scalar activations feeding the next layer
    act = [[[t.const(window[b, ti, i]) for i in range(window.shape[2])]
            for ti in range(T)] for b in range(B)]

    preds = None
    for l in range(n_layers):
        is_output = l == n_layers - 1
        width = len(weights[l])

        cur = [[[None] * width for _ in range(T)] for _ in range(B)]
        for b in range(B):
            for ti in range(T):
                for j in range(width):
                    s = t.mul(w_vars[l][j][0], act[b][ti][0])
                    for i in range(1, len(act[b][ti])):
                        s = t.add(s, t.mul(w_vars[l][j][i], act[b][ti][i]))
                    cur[b][ti][j] = s

        if (not is_output) or normalize_output:
            normed = [[[None] * width for _ in range(T)] for _ in range(B)]
            for j in range(width):
                pooled = [cur[b][ti][j] for b in range(B) for ti in range(T)]
                mu = t.mean(pooled)
                devsq = [t.mul(t.sub(x, mu), t.sub(x, mu)) for x in pooled]
                var = t.mean(devsq)
                istd = t.inv_sqrt(t.shift(var, eps))
                for b in range(B):
                    for ti in range(T):
                        xh = t.mul(t.sub(cur[b][ti][j], mu), istd)
                        normed[b][ti][j] = t.add(
                            t.scale(t.mul(g_vars[l][j], xh), threshold),
                            b_vars[l][j])
        else:
            normed = cur

        if is_output:
            preds = [[[None] * width for _ in range(T)] for _ in range(B)]
            for b in range(B):
                u_prev = [t.const(0.0)] * width
                for ti in range(T):
                    for j in range(width):
                        u = t.add(t.mul(tau_vars[l][j], u_prev[j]),
                                  normed[b][ti][j])
                        preds[b][ti][j] = u
                    u_prev = preds[b][ti]
        else:
            out_act = [[[None] * width for _ in range(T)] for _ in range(B)]
            for b in range(B):
                u_prev = [t.const(0.0)] * width
                s_prev = [t.const(0.0)] * width
                for ti in range(T):
                    u_now, s_now = [], []
                    for j in range(width):
                        if reset_mode == "subtract":
                            kept = t.sub(u_prev[j],
                                         t.scale(s_prev[j], threshold))
                        else:
                            kept = t.mul(u_prev[j],
                                         t.shift(t.scale(s_prev[j], -1.0), 1.0))
                        u = t.add(t.mul(tau_vars[l][j], kept),
                                  normed[b][ti][j])
                        s = t.spike(u, threshold, half_width)
                        u_now.append(u)
                        s_now.append(s)
                        if masks[l] is not None:
                            out_act[b][ti][j] = t.scale(
                                s, float(masks[l][b, ti, j]))
                        else:
                            out_act[b][ti][j] = s
                    u_prev, s_prev = u_now, s_now
            act = out_act

    kept_terms = []
    out_width = targets.shape[2]
    for b in range(B):
        for ti in range(warmup, T):
            for j in range(out_width):
                d = t.shift(preds[b][ti][j], -targets[b, ti, j])
                kept_terms.append(t.mul(d, d))
    loss = t.mean(kept_terms)
    t.backward(loss)

    w_grads = [np.array([[v.grad for v in row] for row in wl]) for wl in w_vars]
    tau_grads = [np.array([v.grad for v in tl]) for tl in tau_vars]
    gamma_grads = [np.array([v.grad for v in gl]) for gl in g_vars]
    beta_grads = [np.array([v.grad for v in bl]) for bl in b_vars]
    return loss.val, w_grads, tau_grads, gamma_grads, beta_grads
