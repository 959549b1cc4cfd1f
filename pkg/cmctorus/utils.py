import os, time
import hashlib
import logging

import numpy as np


def remove_directory(path):
    try:
        for file_or_dir in os.listdir(path):
            full_path = os.path.join(path, file_or_dir)
            if os.path.isfile(full_path):
                os.remove(full_path)
            elif os.path.isdir(full_path):
                remove_directory(full_path)
        os.rmdir(path)
        logging.info(f"Directory '{path}' removed.")
    except OSError as e:
        logging.error(f"Error: {e}")


def age_hours(path):
    return (time.time() - os.path.getmtime(path)) / 3600


def sha256_arrays(*arrays):
    """Content hash of float arrays (dtype, shape and bytes)."""
    digest = hashlib.sha256()
    for arr in arrays:
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        digest.update(str(arr.shape).encode())
        digest.update(arr.tobytes())
    return digest.hexdigest()


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as file:
        for block in iter(lambda: file.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def ensure_directory(path):
    if not os.path.exists(path):
        os.makedirs(path)
    return path
