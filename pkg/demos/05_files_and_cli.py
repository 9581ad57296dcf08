"""Drive the file formats end to end: safetensors in, .znn out, and back.

Run:  python demos/05_files_and_cli.py
"""

import hashlib
import json
import struct
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

tmp = Path(tempfile.mkdtemp(prefix="znn-demo-"))
rng = np.random.default_rng(4)


def write_safetensors(path, tensors):
    header, blobs, off = {}, [], 0
    for name, dtype_str, arr in tensors:
        b = arr.tobytes()
        header[name] = {"dtype": dtype_str, "shape": list(arr.shape),
                        "data_offsets": [off, off + len(b)]}
        off += len(b)
        blobs.append(b)
    hj = json.dumps(header).encode()
    path.write_bytes(struct.pack("<Q", len(hj)) + hj + b"".join(blobs))


u = rng.normal(0, 0.02, (512, 1024)).astype(np.float32).view(np.uint32)
bf16 = ((u + 0x7FFF + ((u >> 16) & 1)) >> 16).astype(np.uint16)
f32 = rng.normal(0, 0.02, (128, 512)).astype(np.float32)
model = tmp / "model.safetensors"
write_safetensors(model, [("layer.0", "BF16", bf16), ("head", "F32", f32)])


def znn(*args, **kw):
    r = subprocess.run([sys.executable, "-m", "znn", *args],
                       capture_output=True, text=True, **kw)
    assert r.returncode == 0, r.stderr
    return r.stdout


print("== compress (per-tensor dtypes come from the safetensors header) ==")
print(znn("compress", str(model), "-o", str(tmp / "model.znn"), "--json"))

print("== inspect ==")
print(znn("inspect", str(tmp / "model.znn")))

znn("decompress", str(tmp / "model.znn"), "-o", str(tmp / "restored.safetensors"))
same = hashlib.sha256(model.read_bytes()).digest() == hashlib.sha256(
    (tmp / "restored.safetensors").read_bytes()).digest()
print(f"round trip byte-identical: {same}")

# a second epoch: perturb and store only the delta
bf16b = bf16 ^ rng.integers(0, 4, bf16.shape, dtype=np.uint16).astype(np.uint16)
epoch2 = tmp / "epoch2.safetensors"
write_safetensors(epoch2, [("layer.0", "BF16", bf16b), ("head", "F32", f32)])
print("== delta vs full epoch ==")
print("delta: " + znn("delta", "--base", str(model), str(epoch2),
                      "-o", str(tmp / "e2.delta.znn")).strip())
print("full:  " + znn("compress", str(epoch2), "-o", str(tmp / "e2.full.znn")).strip())
znn("patch", "--base", str(model), str(tmp / "e2.delta.znn"),
    "-o", str(tmp / "epoch2.restored"))
print("patched byte-identical:",
      (tmp / "epoch2.restored").read_bytes() == epoch2.read_bytes())
print(f"\nartifacts in {tmp}")
