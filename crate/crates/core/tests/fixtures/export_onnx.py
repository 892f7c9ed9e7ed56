"""Regenerates the ONNX fixtures and their reference metadata.

Run from this directory: python3 export_onnx.py
Requires torch and onnx. Outputs are committed, so tests do not need Python.
"""
import json

import torch
from torch import nn

torch.manual_seed(7)


def export(model, example, name, dynamic_batch=False):
    model.eval()
    kwargs = {}
    if dynamic_batch:
        kwargs["dynamic_axes"] = {"x": {0: "batch"}, "y": {0: "batch"}}
    torch.onnx.export(
        model, example, f"{name}.onnx", input_names=["x"], output_names=["y"],
        opset_version=13, dynamo=False, **kwargs,
    )
    with torch.no_grad():
        y = model(example)
    return {
        "input_shape": list(example.shape),
        "output_shape": list(y.shape),
        "input": example.flatten().double().tolist(),
        "output": y.flatten().double().tolist(),
    }


meta = {}

mlp = nn.Sequential(nn.Linear(4, 8), nn.ReLU(), nn.Linear(8, 3))
meta["mlp"] = export(mlp, torch.randn(1, 4), "mlp", dynamic_batch=True)
meta["mlp"]["nodes"] = 3

conv = nn.Sequential(nn.Conv2d(2, 4, 3, padding=1), nn.ReLU(), nn.MaxPool2d(2))
meta["conv_pool"] = export(conv, torch.randn(1, 2, 8, 8), "conv_pool")

class Mixed(nn.Module):
    def __init__(self):
        super().__init__()
        self.conv = nn.Conv2d(1, 3, 3, stride=2)
        self.bn = nn.BatchNorm2d(3)
        self.pool = nn.AvgPool2d(2)
        self.fc = nn.Linear(24, 5)

    def forward(self, x):
        h = self.pool(self.bn(torch.tanh(self.conv(x))))
        h = h.reshape(1, -1)
        h = torch.cat([h, h - 0.5], dim=1)
        return torch.sigmoid(self.fc(h))


mixed = Mixed()
with torch.no_grad():
    bn = mixed.bn
    bn.running_mean.uniform_(-0.5, 0.5)
    bn.running_var.uniform_(0.5, 2.0)
    bn.weight.uniform_(0.5, 1.5)
    bn.bias.uniform_(-0.5, 0.5)
meta["mixed"] = export(mixed, torch.randn(1, 1, 11, 11), "mixed")

softmax = nn.Sequential(nn.Linear(3, 2), nn.Softmax(dim=1))
meta["softmax"] = export(softmax, torch.randn(1, 3), "softmax")

with open("onnx_reference.json", "w") as f:
    json.dump(meta, f, indent=1)
