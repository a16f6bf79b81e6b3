"""Bit-exact serialization of every semantic kind and the ``SPAY`` container.

Symbolic semantics travel as 8-bit ASCII text. Feature maps are uniformly
quantized behind a (scale, offset) float32 header, segmentation maps are packed
fixed-width class ids behind a (width, height) u16 header. Compressed images
are size-only: their byte count is configuration, their bits are zeros.
"""

from __future__ import annotations

import hashlib
import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ClassIdOverflow, CodecError, MalformedPayload
from .semantic_model import (
    TEXT_KINDS,
    BoundingBox,
    FeatureMapSpec,
    SceneAnnotation,
    SceneGraph,
    SegmentationGrid,
    SemanticKind,
    SemanticPayload,
    rasterize_segmentation,
    to_sentences,
)

logger = logging.getLogger(__name__)

PAYLOAD_MAGIC = b"SPAY"
_SECTION_HEADER = struct.Struct(">BI")
_FEATURE_HEADER = struct.Struct(">ff")
_SEGMAP_HEADER = struct.Struct(">HH")
FEATURE_HEADER_BITS = 8 * _FEATURE_HEADER.size
SEGMAP_HEADER_BITS = 8 * _SEGMAP_HEADER.size
CONTAINER_HEADER_BITS = 8 * len(PAYLOAD_MAGIC)
SECTION_HEADER_BITS = 8 * _SECTION_HEADER.size

# Raw 8-bit RGB, the reference for compression rate.
RAW_BITS_PER_PIXEL = 24


@dataclass(frozen=True)
class CodecConfig:
    segmap_grid: tuple[int, int] = (128, 128)
    segmap_bits_per_cell: int = 8
    featuremap_quant_bits: int = 8
    featuremap_shape: tuple[int, int, int] = (4, 64, 64)
    compressed_image_bytes: int | None = None
    compressed_image_bpp: float | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.featuremap_quant_bits <= 16:
            raise ValueError(
                f"featuremap_quant_bits must be in [1, 16], got {self.featuremap_quant_bits}."
            )
        if min(self.segmap_grid) < 1 or max(self.segmap_grid) > 0xFFFF:
            raise ValueError(
                f"segmap_grid dimensions must be in [1, 65535], got {self.segmap_grid}."
            )
        if not 1 <= self.segmap_bits_per_cell <= 32:
            raise ValueError(
                f"segmap_bits_per_cell must be in [1, 32], got {self.segmap_bits_per_cell}."
            )
        if min(self.featuremap_shape) < 1:
            raise ValueError("featuremap_shape dimensions must be positive.")
        if self.compressed_image_bytes is not None and self.compressed_image_bytes < 0:
            raise ValueError("compressed_image_bytes must be non-negative.")
        if self.compressed_image_bpp is not None and not self.compressed_image_bpp >= 0:
            raise ValueError("compressed_image_bpp must be non-negative.")
        if self.compressed_image_bytes is not None and self.compressed_image_bpp is not None:
            raise ValueError("set compressed_image_bytes or compressed_image_bpp, not both.")


@dataclass(frozen=True)
class TextSemantics:
    """Decoded symbolic semantics.

    For scene-graph kinds ``triples`` holds the sentences in order. ``labels``
    and ``boxes`` hold the object list (and its boxes, when the kind carries
    them); for bare scene-graph kinds ``labels`` holds only the isolated
    objects that were appended as bare labels.
    """

    labels: list[str] = field(default_factory=list)
    boxes: list[BoundingBox] = field(default_factory=list)
    triples: list[tuple[str, str, str]] = field(default_factory=list)


@dataclass(frozen=True)
class PayloadMetrics:
    bpp: float
    compression_rate: float


def _bits_to_array(raw: bytes, bit_count: int) -> np.ndarray:
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8))[:bit_count]


def _uint_bits(values: np.ndarray, width: int) -> np.ndarray:
    """MSB-first ``width``-bit encoding of non-negative integers."""
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    return ((values.astype(np.uint64)[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)


def _bits_to_uint(bits: np.ndarray, width: int) -> np.ndarray:
    weights = np.uint64(1) << np.arange(width - 1, -1, -1, dtype=np.uint64)
    return (bits.reshape(-1, width).astype(np.uint64) * weights).sum(axis=1)


# --- text semantics ----------------------------------------------------------


def _box_text(box: BoundingBox) -> str:
    return f"{box.x},{box.y},{box.w},{box.h}"


def render_text(kind: SemanticKind, scene: SceneAnnotation, graph: SceneGraph | None = None) -> str:
    """Canonical text rendering for a symbolic kind.

    ``graph`` replaces the scene's own graph (used for the filtered graph);
    the objects always come from it so ids line up with ``scene.layouts``.
    """
    graph = graph if graph is not None else scene.graph
    objects = graph.objects
    if kind is SemanticKind.OBJECTS:
        return "".join(f"{obj.label}\n" for obj in objects)
    if kind is SemanticKind.LAYOUTS:
        return "".join(f"{_box_text(scene.layouts[obj.id])}\n" for obj in objects)
    if kind is SemanticKind.OBJECTS_LAYOUTS:
        return "".join(f"{obj.label} {_box_text(scene.layouts[obj.id])}\n" for obj in objects)
    if kind not in TEXT_KINDS:
        raise CodecError(f"{kind} has no text rendering")

    lines = [f"{sentence.text}\n" for sentence in to_sentences(graph)]
    if kind is SemanticKind.SCENE_GRAPH_LAYOUTS:
        # The object section lists every object, so isolated ones need no bare label.
        return "".join(lines) + "\n" + render_text(SemanticKind.OBJECTS_LAYOUTS, scene, graph)
    linked = {end for rel in graph.relations for end in (rel.subject_id, rel.object_id)}
    lines += [f"{obj.label}\n" for obj in objects if obj.id not in linked]
    return "".join(lines)


def encode_text_semantics(
    kind: SemanticKind, scene: SceneAnnotation, graph: SceneGraph | None = None
) -> SemanticPayload:
    text = render_text(kind, scene, graph)
    raw = text.encode("ascii")
    return SemanticPayload(kind, raw, 8 * len(raw), (scene.width, scene.height))


def _parse_box(field_text: str) -> BoundingBox:
    parts = field_text.split(",")
    if len(parts) != 4 or not all(p.isascii() and p.isdigit() for p in parts):
        raise MalformedPayload(f"bad box field {field_text!r}")
    return BoundingBox(*(int(p) for p in parts))


def _parse_labelled_box(line: str) -> tuple[str, BoundingBox]:
    label, sep, box = line.partition(" ")
    if not sep or not label:
        raise MalformedPayload(f"bad object-layout line {line!r}")
    return label, _parse_box(box)


def _parse_token(line: str) -> str:
    if not line or " " in line or "," in line:
        raise MalformedPayload(f"bad label line {line!r}")
    return line


def decode_text_semantics(kind: SemanticKind, payload: SemanticPayload) -> TextSemantics:
    if kind not in TEXT_KINDS:
        raise MalformedPayload(f"{kind} is not a text kind")
    if payload.bit_count % 8:
        raise MalformedPayload(f"text payload of {payload.bit_count} bits is not byte aligned")
    try:
        text = payload.bits.decode("ascii")
    except UnicodeDecodeError as e:
        raise MalformedPayload("text payload is not ASCII") from e
    if text and not text.endswith("\n"):
        raise MalformedPayload("text payload must end with a newline")
    lines = text[:-1].split("\n") if text else []

    if kind is SemanticKind.OBJECTS:
        return TextSemantics(labels=[_parse_token(line) for line in lines])
    if kind is SemanticKind.LAYOUTS:
        return TextSemantics(boxes=[_parse_box(line) for line in lines])
    if kind is SemanticKind.OBJECTS_LAYOUTS:
        pairs = [_parse_labelled_box(line) for line in lines]
        return TextSemantics([p[0] for p in pairs], [p[1] for p in pairs])

    if kind is SemanticKind.SCENE_GRAPH_LAYOUTS:
        if "" not in lines:
            raise MalformedPayload("scene-graph-with-layouts payload lacks its blank separator")
        split = lines.index("")
        pairs = [_parse_labelled_box(line) for line in lines[split + 1 :]]
        triples = [_parse_triple(line) for line in lines[:split]]
        return TextSemantics([p[0] for p in pairs], [p[1] for p in pairs], triples)

    triples, isolated = [], []
    for line in lines:
        if " " in line:
            if isolated:
                raise MalformedPayload("sentence after bare labels")
            triples.append(_parse_triple(line))
        else:
            isolated.append(_parse_token(line))
    return TextSemantics(labels=isolated, triples=triples)


def _parse_triple(line: str) -> tuple[str, str, str]:
    parts = line.split(" ")
    if len(parts) != 3 or not all(parts):
        raise MalformedPayload(f"bad sentence line {line!r}")
    return parts[0], parts[1], parts[2]


# --- feature maps ------------------------------------------------------------


def synthetic_feature_map(image_id: str, config: CodecConfig) -> FeatureMapSpec:
    """Stand-in backbone output, seeded by the image id."""
    channels, width, height = config.featuremap_shape
    seed = int.from_bytes(hashlib.blake2b(image_id.encode(), digest_size=8).digest(), "little")
    values = np.random.default_rng(seed).standard_normal(channels * width * height)
    return FeatureMapSpec(channels, width, height, config.featuremap_quant_bits, values)


def _float32_at_least(value: float) -> np.float32:
    f = np.float32(value)
    return np.nextafter(f, np.float32(np.inf)) if float(f) < value else f


def _float32_at_most(value: float) -> np.float32:
    f = np.float32(value)
    return np.nextafter(f, np.float32(-np.inf)) if float(f) > value else f


def _quantizer(vmin: float, vmax: float, levels: int) -> tuple[np.float32, np.float32]:
    """Float32 (scale, offset) whose grid ``offset + k*scale``, k in [0, levels],
    puts every value of [vmin, vmax] within scale/2 of a grid point.

    The scale starts at the step rounded up to float32 and only widens when no
    float32 offset fits, i.e. when float32 spacing near vmin rivals the step.
    The offset is the float32 nearest vmin whenever that one fits.
    """
    scale = _float32_at_least((vmax - vmin) / levels)
    while True:
        s = float(scale)
        lowest, highest = vmax - (levels + 0.5) * s, vmin + s / 2
        offset = np.float32(vmin)
        if float(offset) > highest:
            offset = _float32_at_most(highest)
        elif float(offset) < lowest:
            offset = _float32_at_least(lowest)
        if lowest <= float(offset) <= highest:
            return scale, offset
        # Widen by the float32 gap below vmin; one step always suffices.
        gap = float(np.spacing(np.float32(abs(vmin) + float(scale))))
        scale = max(
            np.nextafter(scale, np.float32(np.inf)),
            _float32_at_least((vmax - vmin + 2.0 * gap) / (levels + 1)),
        )


def encode_feature_map(
    spec: FeatureMapSpec, source_image: tuple[int, int] = (0, 0)
) -> SemanticPayload:
    """Uniform scalar quantization to ``spec.quant_bits`` over [min, max].

    Codes are computed against the float32 header values actually sent. A
    constant map quantizes with scale 0: every code is 0 and the offset holds
    the value rounded to float32.
    """
    if spec.values is None:
        raise CodecError("feature map has no values to encode")
    q = spec.quant_bits
    levels = (1 << q) - 1
    vmin, vmax = float(spec.values.min()), float(spec.values.max())
    if vmax == vmin:
        logger.warning("Feature map range is degenerate (all %r); sending offset only", vmin)
        scale, offset = np.float32(0.0), np.float32(vmin)
        codes = np.zeros(spec.size, dtype=np.uint64)
    else:
        scale, offset = _quantizer(vmin, vmax, levels)
        scaled = (spec.values - np.float64(offset)) / np.float64(scale)
        codes = np.clip(np.rint(scaled), 0, levels).astype(np.uint64)
    header = _bits_to_array(_FEATURE_HEADER.pack(scale, offset), FEATURE_HEADER_BITS)
    bits = np.concatenate([header, _uint_bits(codes, q)])
    return SemanticPayload.from_bit_array(SemanticKind.FEATURE_MAP, bits, source_image)


def decode_feature_map(
    payload: SemanticPayload, shape: tuple[int, int, int], quant_bits: int
) -> np.ndarray:
    """Dequantize to a (channels, width, height) float64 array."""
    count = int(np.prod(shape))
    expected = FEATURE_HEADER_BITS + count * quant_bits
    if payload.bit_count != expected:
        raise MalformedPayload(
            f"feature map payload has {payload.bit_count} bits, expected {expected}"
        )
    scale, offset = _FEATURE_HEADER.unpack(payload.bits[: _FEATURE_HEADER.size])
    codes = _bits_to_uint(payload.unpacked()[FEATURE_HEADER_BITS:], quant_bits)
    return (codes * np.float64(scale) + np.float64(offset)).reshape(shape)


# --- segmentation maps -------------------------------------------------------


def encode_segmentation_map(
    grid: SegmentationGrid, config: CodecConfig, source_image: tuple[int, int] = (0, 0)
) -> SemanticPayload:
    width = config.segmap_bits_per_cell
    if max(grid.width_cells, grid.height_cells) > 0xFFFF:
        raise CodecError(f"grid {grid.width_cells}x{grid.height_cells} exceeds the u16 header")
    top = int(grid.cells.max(initial=0))
    if top >= 1 << width:
        raise ClassIdOverflow(f"class id {top} does not fit in {width} bits per cell")
    header = _bits_to_array(
        _SEGMAP_HEADER.pack(grid.width_cells, grid.height_cells), SEGMAP_HEADER_BITS
    )
    bits = np.concatenate([header, _uint_bits(grid.cells, width)])
    return SemanticPayload.from_bit_array(SemanticKind.SEGMAP, bits, source_image)


def decode_segmentation_map(payload: SemanticPayload, config: CodecConfig) -> SegmentationGrid:
    if payload.bit_count < SEGMAP_HEADER_BITS:
        raise MalformedPayload("segmentation payload shorter than its header")
    w, h = _SEGMAP_HEADER.unpack(payload.bits[: _SEGMAP_HEADER.size])
    width = config.segmap_bits_per_cell
    if payload.bit_count != SEGMAP_HEADER_BITS + w * h * width:
        raise MalformedPayload(f"segmentation payload length does not match a {w}x{h} grid")
    cells = _bits_to_uint(payload.unpacked()[SEGMAP_HEADER_BITS:], width)
    return SegmentationGrid(w, h, cells.astype(np.int64))


# --- compressed image --------------------------------------------------------


def compressed_image_bits_for_bpp(bpp: float, width: int, height: int) -> int:
    """Bit budget of an externally compressed image at ``bpp``, rounded to whole bytes."""
    return 8 * round(bpp * width * height / 8)


def encode_compressed_image(scene: SceneAnnotation, config: CodecConfig) -> SemanticPayload:
    """Placeholder bytes standing in for an externally compressed image.

    The size is either a fixed byte count or ``compressed_image_bpp`` times
    the image area.
    """
    if config.compressed_image_bytes is not None:
        n = config.compressed_image_bytes
    elif config.compressed_image_bpp is not None:
        bpp = config.compressed_image_bpp
        n = compressed_image_bits_for_bpp(bpp, scene.width, scene.height) // 8
    else:
        raise CodecError("neither compressed_image_bytes nor compressed_image_bpp is configured")
    size = (scene.width, scene.height)
    return SemanticPayload(SemanticKind.COMPRESSED_IMAGE, bytes(n), 8 * n, size)


# --- dispatch, metrics, container -------------------------------------------


def encode_section(
    kind: SemanticKind,
    scene: SceneAnnotation,
    config: CodecConfig,
    graph: SceneGraph | None = None,
) -> SemanticPayload:
    if kind in TEXT_KINDS:
        return encode_text_semantics(kind, scene, graph)
    size = (scene.width, scene.height)
    if kind is SemanticKind.FEATURE_MAP:
        return encode_feature_map(synthetic_feature_map(scene.image_id, config), size)
    if kind is SemanticKind.SEGMAP:
        grid = rasterize_segmentation(scene, *config.segmap_grid)
        return encode_segmentation_map(grid, config, size)
    return encode_compressed_image(scene, config)


def payload_metrics(
    payload: SemanticPayload | int, image_width: int, image_height: int
) -> PayloadMetrics:
    if image_width < 1 or image_height < 1:
        raise ValueError(f"Image dimensions must be positive, got {image_width}x{image_height}.")
    bits = payload if isinstance(payload, int) else payload.bit_count
    pixels = image_width * image_height
    return PayloadMetrics(bits / pixels, bits / (RAW_BITS_PER_PIXEL * pixels))


def pack_payload(sections: list[SemanticPayload]) -> SemanticPayload:
    """Wrap sections as magic, then per section u8 kind tag, u32 bit length and
    the section bits padded to a byte."""
    if not sections:
        raise CodecError("a payload needs at least one section")
    out = [PAYLOAD_MAGIC]
    for section in sections:
        out += [_SECTION_HEADER.pack(section.kind.tag, section.bit_count), section.bits]
    raw = b"".join(out)
    return SemanticPayload(sections[0].kind, raw, 8 * len(raw), sections[0].source_image)


def unpack_payload(payload: SemanticPayload) -> list[SemanticPayload]:
    raw = payload.bits
    if raw[: len(PAYLOAD_MAGIC)] != PAYLOAD_MAGIC:
        raise MalformedPayload("payload does not start with the SPAY magic")
    pos = len(PAYLOAD_MAGIC)
    sections = []
    while pos < len(raw):
        if pos + _SECTION_HEADER.size > len(raw):
            raise MalformedPayload(f"section header truncated at byte {pos}")
        tag, bit_count = _SECTION_HEADER.unpack_from(raw, pos)
        pos += _SECTION_HEADER.size
        if tag >= len(SemanticKind):
            raise MalformedPayload(f"unknown section tag {tag}")
        end = pos + -(-bit_count // 8)
        if end > len(raw):
            raise MalformedPayload(f"section of {bit_count} bits truncated at byte {pos}")
        sections.append(
            SemanticPayload(
                SemanticKind.from_tag(tag), raw[pos:end], bit_count, payload.source_image
            )
        )
        pos = end
    return sections
