"""Binary persistence for worlds and occupancy maps.

Both formats are little-endian: a fixed header, run-length-encoded voxel
layers, and a trailing CRC-32 over everything before it. Map files carry
the classification layer (RLE) plus the sparse log-odds layer, so a
save/load round trip is lossless for both.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path as FsPath

import numpy as np

from .errors import MapFormatError
from .geometry import Pose
from .mapping import BLOCK, OccupancyMap
from .world import VoxelWorld

WORLD_MAGIC = b"PSWD"
MAP_MAGIC = b"PSOM"
VERSION = 1


def _rle_encode(flat: np.ndarray) -> bytes:
    """(u8 value, u32 run) pairs over a flattened uint8 array."""
    flat = np.ascontiguousarray(flat, dtype=np.uint8)
    if flat.size == 0:
        return b""
    change = np.flatnonzero(np.r_[True, flat[1:] != flat[:-1]])
    runs = np.diff(np.r_[change, flat.size])
    out = bytearray()
    for val, run in zip(flat[change], runs):
        r = int(run)
        while r > 0:
            chunk = min(r, 0xFFFFFFFF)
            out += struct.pack("<BI", int(val), chunk)
            r -= chunk
    return bytes(out)


def _rle_decode(buf: bytes, offset: int, count: int) -> tuple[np.ndarray, int]:
    out = np.empty(count, dtype=np.uint8)
    pos = 0
    while pos < count:
        if offset + 5 > len(buf):
            raise MapFormatError("truncated run-length data")
        val, run = struct.unpack_from("<BI", buf, offset)
        offset += 5
        if pos + run > count:
            raise MapFormatError("run-length data overruns the lattice")
        out[pos:pos + run] = val
        pos += run
    return out, offset


def _finish(body: bytearray, path) -> None:
    body += struct.pack("<I", zlib.crc32(bytes(body)) & 0xFFFFFFFF)
    FsPath(path).write_bytes(bytes(body))


def _checked_read(path, magic: bytes) -> bytes:
    buf = FsPath(path).read_bytes()
    if len(buf) < len(magic) + 4:
        raise MapFormatError("file too short")
    if buf[:4] != magic:
        raise MapFormatError(f"bad magic, expected {magic!r}")
    crc = struct.unpack("<I", buf[-4:])[0]
    if zlib.crc32(buf[:-4]) & 0xFFFFFFFF != crc:
        raise MapFormatError("checksum mismatch, file corrupted")
    return buf[:-4]


def save_world(world: VoxelWorld, path) -> None:
    body = bytearray(WORLD_MAGIC)
    gen = world.generator.encode()
    body += struct.pack("<HH", VERSION, 0)
    body += struct.pack("<d", world.resolution)
    body += struct.pack("<3I", *world.occupancy.shape)
    body += struct.pack("<6d", *world.start_pose.position, *world.start_pose.rpy)
    body += struct.pack("<i", world.seed)
    body += struct.pack("<B", len(gen)) + gen
    body += _rle_encode(world.occupancy.reshape(-1))
    _finish(body, path)


def load_world(path) -> VoxelWorld:
    buf = _checked_read(path, WORLD_MAGIC)
    try:
        off = 4
        version, _ = struct.unpack_from("<HH", buf, off)
        off += 4
        if version != VERSION:
            raise MapFormatError(f"unsupported world format version {version}")
        (resolution,) = struct.unpack_from("<d", buf, off)
        off += 8
        shape = struct.unpack_from("<3I", buf, off)
        off += 12
        pose_vals = struct.unpack_from("<6d", buf, off)
        off += 48
        (seed,) = struct.unpack_from("<i", buf, off)
        off += 4
        (gen_len,) = struct.unpack_from("<B", buf, off)
        off += 1
        generator = buf[off:off + gen_len].decode()
        off += gen_len
        count = int(np.prod(shape))
        flat, off = _rle_decode(buf, off, count)
    except struct.error as exc:
        raise MapFormatError(f"truncated world file: {exc}") from exc
    start = Pose(position=np.array(pose_vals[:3]), rpy=np.array(pose_vals[3:]))
    return VoxelWorld(resolution=resolution,
                      occupancy=flat.reshape(shape).astype(bool),
                      start_pose=start, generator=generator, seed=seed)


def save_map(occ_map: OccupancyMap, path) -> None:
    snap = occ_map.snapshot()
    body = bytearray(MAP_MAGIC)
    body += struct.pack("<HH", VERSION, 0)
    body += struct.pack("<d", occ_map.resolution)
    body += struct.pack("<3I", *occ_map.shape)
    body += struct.pack("<6d", occ_map.l_occ, occ_map.l_free,
                        occ_map.clamp[0], occ_map.clamp[1],
                        occ_map.occ_threshold, occ_map.free_threshold)
    body += _rle_encode(snap.classes.reshape(-1))

    flat_lo = snap.log_odds.reshape(-1)
    nz = np.flatnonzero(flat_lo)
    body += struct.pack("<Q", nz.size)
    if nz.size:
        body += nz.astype("<u8").tobytes()
        body += flat_lo[nz].astype("<f4").tobytes()
    _finish(body, path)


def load_map(path) -> OccupancyMap:
    buf = _checked_read(path, MAP_MAGIC)
    try:
        off = 4
        version, _ = struct.unpack_from("<HH", buf, off)
        off += 4
        if version != VERSION:
            raise MapFormatError(f"unsupported map format version {version}")
        (resolution,) = struct.unpack_from("<d", buf, off)
        off += 8
        shape = struct.unpack_from("<3I", buf, off)
        off += 12
        l_occ, l_free, c_lo, c_hi, occ_t, free_t = struct.unpack_from("<6d", buf, off)
        off += 48
        count = int(np.prod(shape))
        classes_flat, off = _rle_decode(buf, off, count)
        (nz_count,) = struct.unpack_from("<Q", buf, off)
        off += 8
        idx_bytes = nz_count * 8
        val_bytes = nz_count * 4
        if off + idx_bytes + val_bytes > len(buf):
            raise MapFormatError("truncated log-odds layer")
        idx = np.frombuffer(buf, dtype="<u8", count=nz_count, offset=off)
        off += idx_bytes
        vals = np.frombuffer(buf, dtype="<f4", count=nz_count, offset=off)
        off += val_bytes
    except struct.error as exc:
        raise MapFormatError(f"truncated map file: {exc}") from exc

    occ_map = OccupancyMap(resolution=resolution, shape=tuple(int(s) for s in shape),
                           l_occ=l_occ, l_free=l_free, clamp=(c_lo, c_hi),
                           occ_threshold=occ_t, free_threshold=free_t)
    if nz_count:
        ijk = np.stack(np.unravel_index(idx.astype(np.int64), shape), axis=1)
        keys = ijk // BLOCK
        packed = (keys[:, 0] << 42) | (keys[:, 1] << 21) | keys[:, 2]
        order = np.argsort(packed, kind="stable")
        ijk, vals_o, packed = ijk[order], vals[order], packed[order]
        starts = np.flatnonzero(np.r_[True, packed[1:] != packed[:-1]])
        bounds = np.r_[starts, packed.size]
        for a, b in zip(bounds[:-1], bounds[1:]):
            key = tuple(int(v) for v in ijk[a] // BLOCK)
            blk = occ_map._block(key)
            local = ijk[a:b] % BLOCK
            blk[local[:, 0], local[:, 1], local[:, 2]] = vals_o[a:b]

    # The stored classification layer must agree with the log-odds layer;
    # disagreement means the file was assembled inconsistently.
    rebuilt = occ_map.snapshot().classes.reshape(-1)
    if not np.array_equal(rebuilt, classes_flat):
        raise MapFormatError("classification layer disagrees with log-odds layer")
    return occ_map
