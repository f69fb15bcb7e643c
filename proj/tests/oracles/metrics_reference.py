"""Reference fusion metrics for the frozen 32x32 triplet.

Independent of the C++ code: histograms via numpy, SSIM via scikit-image,
VIF with 2-D scipy convolutions, Qabf with scipy.ndimage Sobel filters.

    python3 metrics_reference.py OUT_DIR     # writes PNGs and expected.txt
"""
import sys
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage, signal
from skimage.metrics import structural_similarity


def make_triplet():
    rng = np.random.default_rng(20240611)
    r, c = np.mgrid[0:32, 0:32].astype(np.float64)
    base = 120 + 60 * np.sin(c / 5.0) * np.cos(r / 7.0)
    hot = 90 * np.exp(-((r - 10) ** 2 + (c - 22) ** 2) / 18.0)
    ir = np.clip(0.6 * base + hot + rng.normal(0, 6, base.shape), 0, 255)
    vis_gray = np.clip(base + 40 * (c > 14) + rng.normal(0, 10, base.shape), 0, 255)
    tint = np.array([1.0, 0.92, 0.8])
    vis = np.clip(vis_gray[..., None] * tint + rng.normal(0, 4, (32, 32, 3)), 0, 255)
    fused = np.clip(0.5 * ir[..., None] + 0.5 * vis + rng.normal(0, 3, (32, 32, 3)), 0, 255)
    q = lambda a: np.rint(a).astype(np.uint8)
    return q(fused), q(ir), q(vis)


def gray(a):
    a = a.astype(np.float64)
    if a.ndim == 3:
        a = 0.299 * a[..., 0] + 0.587 * a[..., 1] + 0.114 * a[..., 2]
    return np.clip(np.rint(a), 0, 255)


def entropy(a):
    h, _ = np.histogram(a, bins=256, range=(0, 256))
    p = h[h > 0] / a.size
    return float(-(p * np.log2(p)).sum())


def mi_pair(a, b):
    joint, _, _ = np.histogram2d(a.ravel(), b.ravel(), bins=256, range=[[0, 256], [0, 256]])
    p = joint / a.size
    pa = p.sum(axis=1, keepdims=True)
    pb = p.sum(axis=0, keepdims=True)
    nz = p > 0
    return float((p[nz] * np.log2(p[nz] / (pa @ pb)[nz])).sum())


def ssim(a, b):
    return float(structural_similarity(a, b, gaussian_weights=True, sigma=1.5,
                                       use_sample_covariance=False, data_range=255))


def gauss2d(n, sigma):
    ax = np.arange(n) - (n - 1) / 2.0
    xx, yy = np.meshgrid(ax, ax)
    k = np.exp(-(xx ** 2 + yy ** 2) / (2 * sigma ** 2))
    return k / k.sum()


def vif(ref, dist):
    sigma_nsq = 2.0
    num = den = 0.0
    for scale in range(1, 5):
        n = 2 ** (4 - scale + 1) + 1
        win = gauss2d(n, n / 5.0)
        filt = lambda x: signal.correlate2d(x, win, mode="valid")
        if scale > 1:
            if min(ref.shape) < n:
                break
            ref = filt(ref)[::2, ::2]
            dist = filt(dist)[::2, ::2]
        if min(ref.shape) < n:
            break
        mu1, mu2 = filt(ref), filt(dist)
        s1 = np.maximum(filt(ref * ref) - mu1 * mu1, 0)
        s2 = np.maximum(filt(dist * dist) - mu2 * mu2, 0)
        s12 = filt(ref * dist) - mu1 * mu2
        g = s12 / (s1 + 1e-10)
        sv = s2 - g * s12
        m = s1 < 1e-10
        g[m] = 0
        sv[m] = s2[m]
        s1[m] = 0
        m = s2 < 1e-10
        g[m] = 0
        sv[m] = 0
        m = g < 0
        sv[m] = s2[m]
        g[m] = 0
        sv[sv <= 1e-10] = 1e-10
        num += np.log10(1 + g * g * s1 / (sv + sigma_nsq)).sum()
        den += np.log10(1 + s1 / sigma_nsq).sum()
    return float(num / den) if den > 0 else 0.0


def sobel(a):
    gx = ndimage.sobel(a, axis=1, mode="nearest")
    gy = ndimage.sobel(a, axis=0, mode="nearest")
    g = np.hypot(gx, gy)
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = np.where(gx == 0, np.pi / 2, np.arctan(gy / np.where(gx == 0, 1, gx)))
    return g, alpha


def qabf(f, a, b):
    gf, af = sobel(f)
    total = 0.0
    weights = 0.0
    for src in (a, b):
        gs, als = sobel(src)
        big = np.maximum(gs, gf)
        with np.errstate(divide="ignore", invalid="ignore"):
            G = np.where(big == 0, 1.0, np.minimum(gs, gf) / np.where(big == 0, 1, big))
        A = 1 - np.abs(als - af) / (np.pi / 2)
        qg = 0.9994 / (1 + np.exp(-15 * (G - 0.5)))
        qa = 0.9879 / (1 + np.exp(-22 * (A - 0.8)))
        total += (qg * qa * gs).sum()
        weights += gs.sum()
    return float(total / weights) if weights > 0 else 0.0


def evaluate(fused, ir, vis):
    f, i, v = gray(fused), gray(ir), gray(vis)
    return {
        "EN": entropy(f),
        "SD": float(np.std(f)),
        "MI": mi_pair(f, i) + mi_pair(f, v),
        "VIF": vif(i, f) + vif(v, f),
        "Qabf": qabf(f, i, v),
        "SSIM": 0.5 * (ssim(f, i) + ssim(f, v)),
    }


def main():
    out = Path(sys.argv[1])
    out.mkdir(parents=True, exist_ok=True)
    fused, ir, vis = make_triplet()
    Image.fromarray(fused, "RGB").save(out / "fused.png")
    Image.fromarray(ir, "L").save(out / "ir.png")
    Image.fromarray(vis, "RGB").save(out / "vis.png")
    # Re-read so the values are computed from exactly what the C++ side loads.
    load = lambda p: np.asarray(Image.open(out / p))
    values = evaluate(load("fused.png"), load("ir.png"), load("vis.png"))
    with open(out / "expected.txt", "w") as fh:
        for k, v in values.items():
            fh.write(f"{k} {v:.17g}\n")
    print(values)


if __name__ == "__main__":
    main()
