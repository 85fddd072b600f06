"""Seeded problem generators, instance specs, grayscale PGM I/O and the
binary instance container.

Randomness comes from ``numpy.random.Generator`` on the PCG64 bit generator
(``numpy.random.default_rng(seed)``). Normal variates use numpy's ziggurat
sampler; Student's-t(4) variates are ``z / sqrt(chi2_4 / 4)`` built from
those normals.
"""

from __future__ import annotations

import io
import math
import os
import struct
from dataclasses import dataclass, field, fields
from typing import Dict, Optional, Tuple

import numpy as np

from .core import CompositeProblem
from .regularizers import L0Norm
from .smooth_models import BlurModel, LeastSquaresRidge, StudentT, gaussian_kernel

FAMILIES = ("l0l2", "studentt", "deblur")


class SpecError(ValueError):
    """Malformed or inconsistent instance spec."""


class PGMError(ValueError):
    """Malformed or truncated PGM data."""


class ContainerError(ValueError):
    """Malformed instance container."""


@dataclass
class InstanceSpec:
    """Everything needed to regenerate an instance.

    ``n`` is derived from ``m`` when left at 0 (``5 m`` for ``l0l2``, ``8 m``
    for ``studentt``). For ``deblur`` the dimensions come from the image.
    """

    family: str
    m: int = 0
    n: int = 0
    mu0: float = 1e-2
    mu2: float = 0.0
    nu: float = 1.0
    seed: int = 0
    kernel_size: int = 9
    kernel_std: float = 4.0
    noise_std: float = 1e-3
    image: Optional[str] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise SpecError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        self.m, self.n, self.seed = int(self.m), int(self.n), int(self.seed)
        if self.family == "l0l2":
            self._fix_ratio(5)
        elif self.family == "studentt":
            self._fix_ratio(8)
            if self.n < 40:
                raise SpecError(f"studentt needs n >= 40 for a nonzero sparsity level, got n={self.n}")
        if not 0 <= self.seed < 2 ** 64:
            raise SpecError("seed must be a 64-bit unsigned integer")

    def _fix_ratio(self, ratio):
        if self.m <= 0 and self.n > 0 and self.n % ratio == 0:
            self.m = self.n // ratio
        if self.n == 0:
            self.n = ratio * self.m
        if self.m <= 0 or self.n <= 0:
            raise SpecError("dimensions must be positive")
        if self.n != ratio * self.m:
            raise SpecError(f"{self.family} requires n = {ratio} m, got n={self.n}, m={self.m}")

    @property
    def sparsity(self) -> int:
        return self.n // 40 if self.family == "studentt" else 0

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None:
                lines.append(f"{f.name} = {v!r}" if isinstance(v, float) else f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_INT_KEYS = {"m", "n", "seed", "kernel_size"}
_FLOAT_KEYS = {"mu0", "mu2", "nu", "kernel_std", "noise_std"}


def parse_spec(text: str) -> InstanceSpec:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    kw: Dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key in _INT_KEYS:
                kw[key] = int(value)
            elif key in _FLOAT_KEYS:
                kw[key] = float(value)
            elif key in ("family", "image"):
                kw[key] = value
            else:
                raise SpecError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, SpecError):
                raise
            raise SpecError(f"line {lineno}: bad value for {key}: {value!r}") from None
    if "family" not in kw:
        raise SpecError("spec is missing 'family'")
    return InstanceSpec(**kw)


def read_spec(path) -> InstanceSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read())


# ---------------------------------------------------------------- generators

def _rng(seed):
    return np.random.default_rng(int(seed))


def student_t4(rng: np.random.Generator, size) -> np.ndarray:
    """Student's t with 4 degrees of freedom as ``z / sqrt(chi2_4 / 4)``."""
    z = rng.standard_normal(size)
    chi2 = np.sum(rng.standard_normal((4,) + np.shape(z)) ** 2, axis=0)
    return z / np.sqrt(chi2 / 4.0)


def gen_l0l2(spec: InstanceSpec) -> Tuple[CompositeProblem, np.ndarray]:
    """Gaussian ``A`` (m x n), uniform ``b`` in ``[0, 1]``, start at zero."""
    if spec.family != "l0l2":
        raise SpecError("gen_l0l2 needs family l0l2")
    rng = _rng(spec.seed)
    A = rng.standard_normal((spec.m, spec.n))
    b = rng.uniform(0.0, 1.0, spec.m)
    f = LeastSquaresRidge(A, b, spec.mu2)
    return CompositeProblem(f, L0Norm(spec.mu0), "l0l2"), np.zeros(spec.n)


def gen_studentt(spec: InstanceSpec) -> Tuple[CompositeProblem, np.ndarray, np.ndarray]:
    """Sparse signal observed through Gaussian ``A`` with heavy-tailed noise.

    Returns ``(problem, x0, x_true)`` with ``x0 = A^T b``.
    """
    if spec.family != "studentt":
        raise SpecError("gen_studentt needs family studentt")
    rng = _rng(spec.seed)
    n, m, k = spec.n, spec.m, spec.sparsity
    A = rng.standard_normal((m, n))
    idx = rng.choice(n, size=k, replace=False)
    signs = rng.choice(np.array([-1.0, 1.0]), size=k)
    x_true = np.zeros(n)
    x_true[idx] = signs * 10.0 ** rng.uniform(0.0, 1.0, k)
    b = A @ x_true + 0.1 * student_t4(rng, m)
    f = StudentT(A, b, spec.nu)
    return CompositeProblem(f, L0Norm(spec.mu0), "studentt"), A.T @ b, x_true


def gen_deblur(image: "GrayImage", kernel_size: int = 9, kernel_std: float = 4.0,
               noise_std: float = 1e-3, mu0: float = 1e-4, mu2: float = 5e-3,
               seed: int = 0) -> Tuple[CompositeProblem, np.ndarray]:
    """Blur ``image``, add Gaussian noise, start from the observation.

    A ``kernel_size`` of 1 gives the identity blur.
    """
    shape = (image.height, image.width)
    kernel = np.ones((1, 1)) if kernel_size == 1 else gaussian_kernel(kernel_size, kernel_std)
    clean = BlurModel(kernel, shape, np.zeros(image.size)).A.apply(image.vector())
    b = clean + noise_std * _rng(seed).standard_normal(clean.size) if noise_std else clean
    f = BlurModel(kernel, shape, b, mu2)
    return CompositeProblem(f, L0Norm(mu0), "deblur"), b.copy()


def generate(spec: InstanceSpec, image: Optional["GrayImage"] = None):
    """Dispatch on ``spec.family``; returns ``(problem, x0, extras)``."""
    if spec.family == "l0l2":
        p, x0 = gen_l0l2(spec)
        return p, x0, {}
    if spec.family == "studentt":
        p, x0, xt = gen_studentt(spec)
        return p, x0, {"x_true": xt}
    if image is None:
        image = read_pgm(spec.image) if spec.image else synthetic_image()
    p, x0 = gen_deblur(image, spec.kernel_size, spec.kernel_std, spec.noise_std,
                       spec.mu0, spec.mu2, spec.seed)
    return p, x0, {"x_true": image.vector()}


# -------------------------------------------------------------------- images

@dataclass
class GrayImage:
    """Grayscale image with pixels in ``[0, 1]``, stored row-major."""

    width: int
    height: int
    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=float).reshape(self.height, self.width)
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")
        if self.pixels.size and not (self.pixels.min() >= 0.0 and self.pixels.max() <= 1.0):
            raise ValueError("pixels must lie in [0, 1]")

    @property
    def size(self) -> int:
        return self.width * self.height

    def vector(self) -> np.ndarray:
        return self.pixels.ravel().copy()

    @classmethod
    def from_vector(cls, v, width: int, height: int, clamp: bool = False) -> "GrayImage":
        v = np.asarray(v, dtype=float)
        if clamp:
            v = np.clip(v, 0.0, 1.0)
        return cls(width, height, v.reshape(height, width))


def synthetic_image(size: int = 64) -> GrayImage:
    """Piecewise-constant test card: a checkerboard with a bright disc."""
    i, j = np.mgrid[0:size, 0:size]
    block = max(size // 8, 1)
    img = np.where(((i // block) + (j // block)) % 2 == 0, 0.2, 0.6)
    c = (size - 1) / 2.0
    img[(i - c) ** 2 + (j - c) ** 2 <= (size / 4.0) ** 2] = 1.0
    return GrayImage(size, size, img)


def _pgm_tokens(data: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens; returns (tokens, offset)."""
    tokens, pos, n = [], 0, len(data)
    while len(tokens) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        if pos >= n:
            raise PGMError(f"truncated header at byte {pos}")
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        tokens.append((data[start:pos], start))
    return tokens, pos


def decode_pgm(data: bytes) -> GrayImage:
    """Decode P2 or P5 bytes."""
    magic = _pgm_tokens(data, 1)[0][0][0]
    if magic not in (b"P2", b"P5"):
        raise PGMError(f"bad magic {magic[:8]!r} at byte 0; expected P2 or P5")
    toks, pos = _pgm_tokens(data, 4)
    vals = []
    for tok, off in toks[1:]:
        try:
            vals.append(int(tok))
        except ValueError:
            raise PGMError(f"expected integer at byte {off}, got {tok[:16]!r}") from None
    w, h, maxval = vals
    if w < 1 or h < 1:
        raise PGMError(f"non-positive dimensions {w}x{h} at byte {toks[1][1]}")
    if not 1 <= maxval <= 65535:
        raise PGMError(f"maxval {maxval} at byte {toks[3][1]} outside [1, 65535]")
    count = w * h
    if magic == b"P5":
        start = pos + 1  # exactly one whitespace byte after maxval
        width = 1 if maxval < 256 else 2
        need = count * width
        got = max(len(data) - start, 0)
        if got < need:
            raise PGMError(f"truncated P5 payload at byte {start}: expected {need} bytes, "
                           f"received {got}")
        raw = np.frombuffer(data, dtype=np.uint8 if width == 1 else ">u2",
                            count=count, offset=start)
    else:
        text = data[pos:].split()
        if len(text) < count:
            raise PGMError(f"truncated P2 payload after byte {pos}: expected {count} samples, "
                           f"received {len(text)}")
        try:
            raw = np.array([int(t) for t in text[:count]])
        except ValueError:
            raise PGMError(f"non-integer sample in P2 payload after byte {pos}") from None
    if raw.max(initial=0) > maxval:
        raise PGMError(f"sample exceeds maxval {maxval}")
    return GrayImage(w, h, raw.astype(float).reshape(h, w) / maxval)


def read_pgm(path) -> GrayImage:
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read image {path}: {exc.strerror}") from exc
    try:
        return decode_pgm(data)
    except PGMError as exc:
        raise PGMError(f"{path}: {exc}") from None


def encode_pgm(image: GrayImage, maxval: int = 255, binary: bool = True) -> bytes:
    if not 1 <= maxval <= 65535:
        raise ValueError("maxval must lie in [1, 65535]")
    q = np.rint(np.clip(image.pixels, 0.0, 1.0) * maxval).astype(np.int64)
    header = f"{'P5' if binary else 'P2'}\n{image.width} {image.height}\n{maxval}\n".encode()
    if binary:
        dtype = np.uint8 if maxval < 256 else ">u2"
        return header + q.astype(dtype).tobytes()
    rows = "\n".join(" ".join(map(str, r)) for r in q)
    return header + rows.encode() + b"\n"


def write_pgm(path, image: GrayImage, maxval: int = 255, binary: bool = True) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_pgm(image, maxval, binary))


# ---------------------------------------------------------- binary container
#
# Layout (all little-endian):
#   8s   magic  b"GCNMINST"
#   u32  version
#   u32  family name length, then the UTF-8 name
#   u32  number of dims, then that many u64
#   u32  spec text length, then the UTF-8 spec text
#   u32  array count, then per array:
#        u32 name length, name, u32 ndim, ndim x u64 shape, raw float64 data

MAGIC = b"GCNMINST"
VERSION = 1


def _put_str(buf, s: str):
    raw = s.encode("utf-8")
    buf.write(struct.pack("<I", len(raw)))
    buf.write(raw)


def dump_instance(spec: InstanceSpec, dims, arrays: Dict[str, np.ndarray]) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    _put_str(buf, spec.family)
    buf.write(struct.pack("<I", len(dims)))
    buf.write(struct.pack(f"<{len(dims)}Q", *dims))
    _put_str(buf, spec.to_text())
    buf.write(struct.pack("<I", len(arrays)))
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        _put_str(buf, name)
        buf.write(struct.pack("<I", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        buf.write(arr.tobytes())
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, k: int) -> bytes:
        if self.pos + k > len(self.data):
            raise ContainerError(f"truncated container at byte {self.pos}: expected {k} bytes, "
                                 f"received {len(self.data) - self.pos}")
        out = self.data[self.pos:self.pos + k]
        self.pos += k
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64s(self, k: int):
        return struct.unpack(f"<{k}Q", self.take(8 * k))

    def string(self) -> str:
        return self.take(self.u32()).decode("utf-8")


@dataclass
class InstanceFile:
    spec: InstanceSpec
    dims: Tuple[int, ...]
    arrays: Dict[str, np.ndarray]


def load_instance_bytes(data: bytes) -> InstanceFile:
    r = _Reader(data)
    if r.take(len(MAGIC)) != MAGIC:
        raise ContainerError("not an instance file (bad magic)")
    version = r.u32()
    if version != VERSION:
        raise ContainerError(f"unsupported container version {version}")
    family = r.string()
    dims = r.u64s(r.u32())
    spec = parse_spec(r.string())
    if spec.family != family:
        raise ContainerError("family in header disagrees with the embedded spec")
    arrays = {}
    for _ in range(r.u32()):
        name = r.string()
        shape = r.u64s(r.u32())
        count = int(np.prod(shape, dtype=np.int64))
        arrays[name] = np.frombuffer(r.take(8 * count), dtype="<f8").reshape(shape).astype(float)
    return InstanceFile(spec, tuple(int(d) for d in dims), arrays)


def save_instance(path, spec: InstanceSpec, image: Optional[GrayImage] = None) -> InstanceFile:
    """Generate the instance for ``spec`` and write it to ``path``."""
    problem, x0, extras = generate(spec, image)
    f = problem.f
    arrays = {"x0": x0, "b": np.asarray(f.b, dtype=float)}
    if spec.family == "deblur":
        arrays["kernel"] = f.kernel
        dims = f.image_shape
    else:
        arrays["A"] = f.A.to_dense()
        dims = (spec.m, spec.n)
    arrays.update(extras)
    with open(path, "wb") as fh:
        fh.write(dump_instance(spec, dims, arrays))
    return InstanceFile(spec, tuple(dims), arrays)


def load_instance(path) -> InstanceFile:
    with open(path, "rb") as fh:
        return load_instance_bytes(fh.read())


def problem_from_file(inst: InstanceFile) -> Tuple[CompositeProblem, np.ndarray]:
    """Rebuild the problem stored in a container (no regeneration)."""
    s, a = inst.spec, inst.arrays
    if s.family == "l0l2":
        f = LeastSquaresRidge(a["A"], a["b"], s.mu2)
    elif s.family == "studentt":
        f = StudentT(a["A"], a["b"], s.nu)
    else:
        f = BlurModel(a["kernel"], inst.dims, a["b"], s.mu2)
    return CompositeProblem(f, L0Norm(s.mu0), s.family), a["x0"].copy()
