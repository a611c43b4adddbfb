"""The small convolutional network predicting the coefficient tensor.

Residual-block backbone: a 3x3 head expanding the stacked image+PAN input
to `hidden_channels`, `res_blocks` residual pairs of 3x3 convolutions, and
a 3x3 tail back to the band count. The final ReLU keeps the predicted
coefficients nonnegative. All convolutions are stride 1 with mirror
padding, so the output matches the input spatially.
"""

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import npyio, tensor


@dataclass(frozen=True)
class NetArch:
    in_channels: int
    out_channels: int
    hidden_channels: int = 32
    res_blocks: int = 4
    kernel: int = 3

    def __post_init__(self):
        if min(self.in_channels, self.out_channels, self.hidden_channels) < 1 or self.res_blocks < 0:
            raise ValueError(f"invalid architecture {self}")
        if self.kernel % 2 == 0:
            raise ValueError(f"kernel size must be odd, got {self.kernel}")

    def layer_channels(self):
        """(cin, cout) for every convolution, head to tail."""
        c = self.hidden_channels
        layers = [(self.in_channels, c)]
        layers += [(c, c)] * (2 * self.res_blocks)
        layers.append((c, self.out_channels))
        return layers

    def param_count(self):
        k2 = self.kernel * self.kernel
        return sum(cin * cout * k2 + cout for cin, cout in self.layer_channels())


@dataclass
class NetParams:
    """Ordered convolution weights (k, k, cin, cout) and biases (cout,)."""

    arch: NetArch
    weights: list
    biases: list
    seed: int | None = None

    def copy(self):
        return NetParams(self.arch, [w.copy() for w in self.weights], [b.copy() for b in self.biases], self.seed)

    def flat(self):
        """Weights and biases interleaved per layer, the canonical order."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    @staticmethod
    def from_flat(arch, arrays, seed=None):
        weights, biases = list(arrays[0::2]), list(arrays[1::2])
        return NetParams(arch, weights, biases, seed)


def init_params(arch: NetArch, seed: int) -> NetParams:
    """Fan-in scaled uniform weights (bound sqrt(6/fan_in)), zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    k = arch.kernel
    for cin, cout in arch.layer_channels():
        bound = math.sqrt(6.0 / (k * k * cin))
        weights.append(rng.uniform(-bound, bound, size=(k, k, cin, cout)))
        biases.append(np.zeros(cout, dtype=np.float64))
    return NetParams(arch, weights, biases, seed)


def noise_input(seed: int, height: int, width: int, channels: int) -> np.ndarray:
    """Frozen standard-normal network input for the random-input ablation."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal((height, width, channels))


def make_input(x, p) -> np.ndarray:
    """Stack the current image estimate and the PAN into the network input."""
    x = tensor.as_tensor3(x, "image")
    p = tensor.as_tensor2(p, "pan")
    return tensor.concat_bands(x, p[:, :, None])


def forward_on_tape(tape, param_nodes, net_in):
    """Run the network on recorded nodes; returns the output node.

    param_nodes: nodes in NetParams.flat() order. net_in: node holding the
    (H, W, in_channels) input.
    """
    w_nodes, b_nodes = param_nodes[0::2], param_nodes[1::2]
    h = ad.relu(ad.conv_mix(net_in, w_nodes[0], b_nodes[0]))
    n_blocks = (len(w_nodes) - 2) // 2
    for i in range(n_blocks):
        wa, ba = w_nodes[1 + 2 * i], b_nodes[1 + 2 * i]
        wb, bb = w_nodes[2 + 2 * i], b_nodes[2 + 2 * i]
        inner = ad.conv_mix(ad.relu(ad.conv_mix(h, wa, ba)), wb, bb)
        h = ad.add(h, inner)
    return ad.relu(ad.conv_mix(h, w_nodes[-1], b_nodes[-1]))


def forward_from_input(params: NetParams, net_in) -> np.ndarray:
    """Plain (untaped) network evaluation on a prepared input."""
    t = ad.Tape()
    nodes = [t.constant(a) for a in params.flat()]
    return forward_on_tape(t, nodes, t.constant(net_in)).value


def forward(params: NetParams, x, p) -> np.ndarray:
    """Predict the nonnegative coefficient tensor from the image and PAN."""
    return forward_from_input(params, make_input(x, p))


def save_params(params: NetParams, directory: str) -> None:
    """Checkpoint: one NPY file per array plus a JSON manifest."""
    os.makedirs(directory, exist_ok=True)
    names = []
    for i, arr in enumerate(params.flat()):
        name = f"arr_{i:03d}.npy"
        npyio.write_npy(os.path.join(directory, name), arr)
        names.append(name)
    manifest = {
        "arch": {
            "in_channels": params.arch.in_channels,
            "out_channels": params.arch.out_channels,
            "hidden_channels": params.arch.hidden_channels,
            "res_blocks": params.arch.res_blocks,
            "kernel": params.arch.kernel,
        },
        "seed": params.seed,
        "arrays": names,
    }
    with open(os.path.join(directory, "params.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)


def load_params(directory: str) -> NetParams:
    with open(os.path.join(directory, "params.json")) as fh:
        manifest = json.load(fh)
    arch = NetArch(**manifest["arch"])
    raw = [npyio.read_npy(os.path.join(directory, name)) for name in manifest["arrays"]]
    # weight files are 4-D and come back unchanged; biases are stored 2-D
    arrays = []
    for arr, name in zip(raw, manifest["arrays"]):
        arrays.append(arr)
    params = NetParams.from_flat(arch, arrays, manifest.get("seed"))
    for (w, b), (cin, cout) in zip(zip(params.weights, params.biases), arch.layer_channels()):
        if w.shape != (arch.kernel, arch.kernel, cin, cout) or b.shape != (cout,):
            raise ValueError(f"checkpoint arrays do not match the declared architecture")
    return params
