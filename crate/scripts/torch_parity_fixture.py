"""Regenerate crates/core/tests/fixtures/torch_lenet/ from a PyTorch LeNet-5.

Writes one LNW1 bundle per variant, a batch of images and the float64 eval-mode
logits PyTorch computes for them. Run from the repository root:

    python3 scripts/torch_parity_fixture.py
"""

import json
from pathlib import Path

import numpy as np
import torch
from torch import nn

OUT = Path("crates/core/tests/fixtures/torch_lenet")
NAMES = ["conv1", "conv2", "conv3", "linr1", "linr2"]


def lenet(dropout: bool) -> nn.Sequential:
    def drop(layer):
        return [layer] if dropout else []

    return nn.Sequential(
        nn.Conv2d(1, 6, 5), *drop(nn.Dropout2d(0.2)), nn.Tanh(), nn.AvgPool2d(2),
        nn.Conv2d(6, 16, 5), *drop(nn.Dropout2d(0.2)), nn.Tanh(), nn.AvgPool2d(2),
        nn.Conv2d(16, 120, 5), *drop(nn.Dropout2d(0.2)), nn.Tanh(), nn.Flatten(),
        nn.Linear(120, 84), *drop(nn.Dropout(0.2)), nn.Tanh(),
        nn.Linear(84, 10),
    )


def write_bundle(model: nn.Sequential, variant: str, path: Path) -> None:
    path.mkdir(parents=True, exist_ok=True)
    layers = [m for m in model if isinstance(m, (nn.Conv2d, nn.Linear))]
    blob, params = bytearray(), []
    for name, layer in zip(NAMES, layers):
        for suffix, tensor in (("w", layer.weight), ("b", layer.bias)):
            arr = tensor.detach().numpy().astype("<f4")
            params.append({"name": f"{name}.{suffix}", "shape": list(arr.shape), "offset_bytes": len(blob)})
            blob += arr.tobytes()
    manifest = {"format": "LNW1", "variant": variant, "params": params, "exporter": "torch"}
    (path / "manifest.json").write_text(json.dumps(manifest, indent=1))
    (path / "weights.bin").write_bytes(bytes(blob))


def main() -> None:
    torch.manual_seed(0)
    images = torch.rand(8, 1, 32, 32)
    images[:, :, :2, :] = 0  # the same zero border MNIST padding produces
    images[:, :, -2:, :] = 0
    OUT.mkdir(parents=True, exist_ok=True)
    np.save(OUT / "images.npy", images.numpy().astype("<f4"))
    for variant in ("basic", "dropout"):
        model = lenet(variant == "dropout").eval()
        write_bundle(model, variant, OUT / variant)
        with torch.no_grad():
            logits = model.double()(images.double())
        np.save(OUT / f"logits_{variant}.npy", logits.numpy().astype("<f8"))


if __name__ == "__main__":
    main()
