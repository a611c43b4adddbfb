"""Minimal reverse-mode differentiation over the tensor kernels.

Forward values are computed eagerly; each recorded node keeps a backward
rule closure. A backward sweep walks the tape once in reverse creation
order and accumulates gradients by summation wherever a node fans out.
Scalars travel as 0-d arrays so the same rules cover reductions.
"""

import numpy as np

from . import _kernels, tensor


class TapeError(RuntimeError):
    """Raised when nodes from different tapes are mixed or a rule is misused."""


class Node:
    """One recorded value. Leaves carry requires_grad; results carry a rule."""

    __slots__ = ("tape", "value", "parents", "rule", "requires", "index")

    def __init__(self, tape, value, parents=(), rule=None, requires=False):
        self.tape = tape
        self.value = value
        self.parents = parents
        self.rule = rule
        self.requires = requires
        self.index = len(tape.nodes)
        tape.nodes.append(self)

    @property
    def shape(self):
        return self.value.shape


class Tape:
    """Append-only record of primitive applications."""

    def __init__(self):
        self.nodes = []

    def leaf(self, value, requires_grad=True):
        value = np.asarray(value)
        if value.dtype not in tensor.FLOAT_DTYPES:
            value = value.astype(np.float64)
        return Node(self, np.ascontiguousarray(value), requires=requires_grad)

    def constant(self, value):
        return self.leaf(value, requires_grad=False)


def _wrap(tape, x):
    if isinstance(x, Node):
        if x.tape is not tape:
            raise TapeError("operands recorded on different tapes")
        return x
    return tape.constant(np.asarray(x))


def _tape_of(*args):
    for a in args:
        if isinstance(a, Node):
            return a.tape
    raise TapeError("at least one operand must be a tape node")


def _record(value, parents, rule):
    tape = parents[0].tape
    requires = any(p.requires for p in parents)
    return Node(tape, value, parents, rule if requires else None, requires)


def add(a, b):
    t = _tape_of(a, b)
    a, b = _wrap(t, a), _wrap(t, b)
    tensor._check_same_shape(a.value, b.value)
    return _record(a.value + b.value, (a, b), lambda g, need: (g if need[0] else None, g if need[1] else None))


def sub(a, b):
    t = _tape_of(a, b)
    a, b = _wrap(t, a), _wrap(t, b)
    tensor._check_same_shape(a.value, b.value)
    return _record(a.value - b.value, (a, b), lambda g, need: (g if need[0] else None, -g if need[1] else None))


def mul(a, b):
    t = _tape_of(a, b)
    a, b = _wrap(t, a), _wrap(t, b)
    tensor._check_same_shape(a.value, b.value)
    av, bv = a.value, b.value
    return _record(av * bv, (a, b), lambda g, need: (g * bv if need[0] else None, g * av if need[1] else None))


def scale(a, c):
    c = float(c)
    return _record(a.value * c, (a,), lambda g, need: (g * c,))


def _relu_mask(x):
    # seam for the gradcheck mutation test; derivative at 0 defined as 0
    return x > 0


def relu(a):
    mask = _relu_mask(a.value)
    return _record(np.where(mask, a.value, 0.0), (a,), lambda g, need: (g * _relu_mask(a.value),))


def concat_bands(a, b):
    t = _tape_of(a, b)
    a, b = _wrap(t, a), _wrap(t, b)
    value = tensor.concat_bands(a.value, b.value)
    split = a.value.shape[2]
    return _record(
        value,
        (a, b),
        lambda g, need: (
            np.ascontiguousarray(g[:, :, :split]) if need[0] else None,
            np.ascontiguousarray(g[:, :, split:]) if need[1] else None,
        ),
    )


def conv2d_same(a, kernels):
    """Per-band convolution; differentiable in the image, kernels fixed."""
    kernels = tensor._check_kernels(tensor.as_tensor3(a.value), kernels)
    value = _kernels.conv_bank(a.value, kernels)
    return _record(value, (a,), lambda g, need: (_kernels.conv_bank_adjoint(np.ascontiguousarray(g), kernels),))


def conv_mix(x, w, b):
    """Channel-mixing convolution, differentiable in image, weights and bias."""
    t = _tape_of(x, w, b)
    x, w, b = _wrap(t, x), _wrap(t, w), _wrap(t, b)
    value = _kernels.conv_mix(x.value, w.value, b.value)

    def rule(g, need):
        g = np.ascontiguousarray(g)
        gx, gw, gb = _kernels.conv_mix_grads(x.value, w.value, g, need_x=need[0], need_w=need[1])
        return (gx, gw, gb if need[2] else None)

    return _record(value, (x, w, b), rule)


def decimate(a, r, offset=0):
    value = tensor.decimate(a.value, r, offset)
    return _record(value, (a,), lambda g, need: (tensor.zero_insert(np.ascontiguousarray(g), r, offset),))


def upsample(a, r):
    h, w = a.value.shape[0], a.value.shape[1]
    value = tensor.upsample(a.value, r)
    return _record(value, (a,), lambda g, need: (tensor.upsample_adjoint(np.ascontiguousarray(g), r, h, w),))


def frob_sq(a):
    value = np.asarray(np.sum(a.value * a.value))
    return _record(value, (a,), lambda g, need: (2.0 * a.value * g,))


def backward(loss, leaves):
    """Gradients of a scalar loss node with respect to the given leaves.

    Returns a dict mapping each requested leaf node to an array of the
    leaf's shape; leaves with no path to the loss get zeros.
    """
    if loss.value.size != 1:
        raise TapeError(f"loss must be scalar, got shape {loss.value.shape}")
    for leaf in leaves:
        if leaf.tape is not loss.tape:
            raise TapeError("leaf recorded on a different tape")

    grads = {loss.index: np.ones_like(loss.value)}
    for node in reversed(loss.tape.nodes[: loss.index + 1]):
        g = grads.pop(node.index, None)
        if g is None or node.rule is None:
            continue
        need = tuple(p.requires for p in node.parents)
        parent_grads = node.rule(g, need)
        for parent, pg in zip(node.parents, parent_grads):
            if pg is None or not parent.requires:
                continue
            if parent.index in grads:
                grads[parent.index] = grads[parent.index] + pg
            else:
                grads[parent.index] = pg

    out = {}
    for leaf in leaves:
        g = grads.get(leaf.index)
        if g is None:
            g = np.zeros_like(leaf.value)
        if not np.all(np.isfinite(g)):
            raise TapeError("non-finite gradient")
        out[leaf] = np.asarray(g, dtype=leaf.value.dtype).reshape(leaf.value.shape)
    return out


def gradcheck(f, leaves, step=1e-5, tol=1e-6, samples=None, seed=0):
    """Compare tape gradients of f against central finite differences.

    f takes (tape, [leaf nodes]) and returns a scalar node. The reported
    error per leaf is max |analytic - numeric| / max(|analytic|, |numeric|, 1),
    i.e. relative above unit scale and absolute below it. When `samples` is
    given, only that many randomly chosen elements per leaf are probed.

    Returns a dict with per-leaf errors and an overall `passed` flag.
    """
    leaves = [np.asarray(v, dtype=np.float64) for v in leaves]

    def run(values):
        t = Tape()
        nodes = [t.leaf(v) for v in values]
        return f(t, nodes), nodes

    loss, nodes = run(leaves)
    analytic = backward(loss, nodes)
    rng = np.random.default_rng(seed)

    report = {"per_leaf": [], "passed": True, "tol": tol}
    for li, base in enumerate(leaves):
        flat_n = base.size
        probe = np.arange(flat_n) if samples is None or samples >= flat_n else rng.choice(flat_n, size=samples, replace=False)
        worst = 0.0
        ana = analytic[nodes[li]].reshape(-1)
        for idx in probe:
            bumped = [v.copy() for v in leaves]
            flat = bumped[li].reshape(-1)
            flat[idx] += step
            f_plus = float(run(bumped)[0].value)
            flat[idx] -= 2 * step
            f_minus = float(run(bumped)[0].value)
            numeric = (f_plus - f_minus) / (2 * step)
            err = abs(ana[idx] - numeric) / max(abs(ana[idx]), abs(numeric), 1.0)
            worst = max(worst, err)
        report["per_leaf"].append(worst)
        if worst > tol:
            report["passed"] = False
    report["max_error"] = max(report["per_leaf"]) if report["per_leaf"] else 0.0
    return report
