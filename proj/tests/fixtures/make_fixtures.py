# Copyright 2026 The FusionPool Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.


# Regenerates the reference fixtures used by the unit tests:
#   frame_7x5.png + frame_7x5_pm1.txt / frame_7x5_imagenet.txt
#       bilinear (half-pixel) resize to 4x4 and normalization, computed with torch
#   tiny_cnn.onnx + tiny_cnn.meta + tiny_cnn_io.txt
#       a small conv net with (maps, pooled) outputs and its torch outputs
import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from PIL import Image

rng = np.random.default_rng(1234)

img = rng.integers(0, 256, size=(5, 7, 3), dtype=np.uint8)  # H=5, W=7
Image.fromarray(img, "RGB").save("frame_7x5.png")

x = torch.from_numpy(img.astype(np.float64)).permute(2, 0, 1)[None]
r = F.interpolate(x, size=(4, 4), mode="bilinear", align_corners=False, antialias=False)[0]
r = r.permute(1, 2, 0).numpy()  # HWC
pm1 = r / 127.5 - 1.0
mean = np.array([0.485, 0.456, 0.406])
std = np.array([0.229, 0.224, 0.225])
imnet = (r / 255.0 - mean) / std
np.savetxt("frame_7x5_pm1.txt", pm1.reshape(-1), fmt="%.12f")
np.savetxt("frame_7x5_imagenet.txt", imnet.reshape(-1), fmt="%.12f")


class Tiny(nn.Module):
    def __init__(self):
        super().__init__()
        self.c1 = nn.Conv2d(3, 6, 3, padding=1)
        self.bn = nn.BatchNorm2d(6)
        self.c2 = nn.Conv2d(6, 6, 3, padding=1, groups=3)
        self.c3 = nn.Conv2d(6, 5, 1)

    def forward(self, x):
        y = F.relu(self.bn(self.c1(x)))
        y = F.max_pool2d(y, 2)
        y = F.hardtanh(self.c2(y), 0.0, 6.0)
        y = torch.sigmoid(self.c3(y)) * y[:, :5] + F.avg_pool2d(F.pad(y[:, 1:], (1, 1, 1, 1)), 3, stride=1)
        maps = F.relu(y)
        pooled = torch.flatten(F.adaptive_avg_pool2d(maps, 1), 1)
        return maps, pooled


torch.manual_seed(7)
net = Tiny().eval()
with torch.no_grad():
    net.bn.running_mean.uniform_(-0.5, 0.5)
    net.bn.running_var.uniform_(0.5, 1.5)
    net.bn.weight.uniform_(0.5, 1.5)
    net.bn.bias.uniform_(-0.2, 0.2)

inp = torch.from_numpy(rng.uniform(-1, 1, size=(1, 3, 8, 8)).astype(np.float32))
with torch.no_grad():
    maps, pooled = net(inp)
torch.onnx.export(net, (inp,), "tiny_cnn.onnx", input_names=["image"], output_names=["maps", "pooled"],
                  opset_version=13, dynamo=False)

with open("tiny_cnn.meta", "w") as f:
    f.write("input_size=8\nK=5\nh=4\nw=4\nnormalization=scale_pm1\n")

with open("tiny_cnn_io.txt", "w") as f:
    f.write(" ".join(f"{v:.9g}" for v in inp.numpy().reshape(-1)) + "\n")
    f.write(" ".join(f"{v:.9g}" for v in maps.numpy().reshape(-1)) + "\n")
    f.write(" ".join(f"{v:.9g}" for v in pooled.numpy().reshape(-1)) + "\n")

try:
    import onnxruntime as ort
    sess = ort.InferenceSession("tiny_cnn.onnx")
    om, op = sess.run(None, {"image": inp.numpy()})
    print("onnxruntime max |d| maps", np.abs(om - maps.numpy()).max(), "pooled", np.abs(op - pooled.numpy()).max())
except ImportError:
    pass
