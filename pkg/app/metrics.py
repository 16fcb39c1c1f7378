#!/usr/bin/python3
# -----------------------------------------------------------
# Image quality metrics: PSNR and SSIM
# -----------------------------------------------------------
import numpy as np
import torch
import torch.nn.functional as F

from app.exceptions import DimensionMismatch, ImageTooSmall


PSNR_CAP = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check_pair(img_a, img_b):
    img_a = np.asarray(img_a, dtype=np.float64)
    img_b = np.asarray(img_b, dtype=np.float64)
    if img_a.shape != img_b.shape:
        raise DimensionMismatch(img_a.shape, img_b.shape)
    return img_a, img_b


def psnr(img_a, img_b):
    """
    10 log10(1 / MSE) over all pixels and channels for images in [0, 1], capped at PSNR_CAP dB
    """
    img_a, img_b = _check_pair(img_a, img_b)
    mse = float(np.mean((img_a - img_b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return float(min(10.0 * np.log10(1.0 / mse), PSNR_CAP))


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    """
    normalized 2D Gaussian window of shape (size, size)
    """
    coords = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    profile = np.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    profile /= profile.sum()
    return np.outer(profile, profile)


def ssim(img_a, img_b, data_range=1.0):
    """
    mean structural similarity with an 11x11 Gaussian window (σ = 1.5) over valid window positions,
    computed per channel and averaged
    """
    img_a, img_b = _check_pair(img_a, img_b)
    if min(img_a.shape[:2]) < SSIM_WINDOW:
        raise ImageTooSmall(img_a.shape, SSIM_WINDOW)
    if img_a.ndim == 2:
        img_a, img_b = img_a[..., None], img_b[..., None]

    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    window = torch.from_numpy(gaussian_window()).view(1, 1, SSIM_WINDOW, SSIM_WINDOW)
    # (H, W, C) -> (C, 1, H, W): every channel filtered independently
    tensor_a = torch.from_numpy(np.ascontiguousarray(img_a.transpose(2, 0, 1))).unsqueeze(1)
    tensor_b = torch.from_numpy(np.ascontiguousarray(img_b.transpose(2, 0, 1))).unsqueeze(1)

    def _filter(values):
        return F.conv2d(values, window)

    mu_a, mu_b = _filter(tensor_a), _filter(tensor_b)
    var_a = _filter(tensor_a * tensor_a) - mu_a ** 2
    var_b = _filter(tensor_b * tensor_b) - mu_b ** 2
    covariance = _filter(tensor_a * tensor_b) - mu_a * mu_b
    ssim_map = ((2.0 * mu_a * mu_b + c1) * (2.0 * covariance + c2)) / \
        ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2))
    per_channel = ssim_map.mean(dim=(1, 2, 3))
    return float(per_channel.mean())
