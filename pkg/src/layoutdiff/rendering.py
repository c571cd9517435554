"""Deterministic rasterization of layouts.

Five-attribute schemas render in legend mode: each element is a flat fill in
its class color, painted in sequence order so later elements cover earlier
ones. Schemas with style attributes render in style mode: background color
fills, a border whose thickness scales with font weight, and dummy-text glyph
blocks in the foreground color sized by font size and shifted by alignment.
"""
from __future__ import annotations

import colorsys
import io

import numpy as np
from PIL import Image, ImageDraw

from layoutdiff.layouts import Layout
from layoutdiff.schema import AttributeSchema


class RenderError(ValueError):
    pass


def class_palette(num_classes: int) -> list[tuple[int, int, int]]:
    """Fixed, evenly spaced class colors shared by all renderers."""
    colors = []
    for k in range(num_classes):
        h = (k * 0.61803398875) % 1.0  # golden-ratio hue steps
        s = 0.55 if k % 2 == 0 else 0.75
        v = 0.9 if k % 3 else 0.75
        r, g, b = colorsys.hsv_to_rgb(h, s, v)
        colors.append((int(r * 255), int(g * 255), int(b * 255)))
    return colors


def _cell_to_px(v0: int, v1: int, size: int, resolution: int) -> tuple[int, int]:
    # Boxes cover cells [v0, v1] inclusive; map cell edges to pixel edges.
    p0 = (v0 * size) // resolution
    p1 = ((v1 + 1) * size) // resolution
    return p0, max(p1, p0 + 1)


def render(layout: Layout, width: int | None = None, height: int | None = None) -> np.ndarray:
    """Rasterize a layout to an RGB uint8 array of shape (height, width, 3)."""
    schema = layout.schema
    width = schema.canvas_width if width is None else width
    height = schema.canvas_height if height is None else height
    if width < 1 or height < 1:
        raise RenderError(f"canvas must be positive, got {width}x{height}")

    styled = schema.num_attributes > 5
    img = Image.new("RGB", (width, height), (255, 255, 255))
    res = schema.resolution
    palette = class_palette(schema.num_classes)

    for e in layout.valid_elements:
        x0, y0, x1, y1 = e.box(schema)
        px0, px1 = _cell_to_px(x0, x1, width, res)
        py0, py1 = _cell_to_px(y0, y1, height, res)
        if styled:
            _draw_styled(img, schema, e, px0, py0, px1, py1)
        else:
            draw = ImageDraw.Draw(img)
            draw.rectangle(
                (px0, py0, px1 - 1, py1 - 1), fill=palette[e.class_id(schema)]
            )
    return np.asarray(img, dtype=np.uint8)


def _draw_styled(img, schema: AttributeSchema, e, px0, py0, px1, py1) -> None:
    v = lambda name: e.value(schema, name)
    overlay = Image.new("RGBA", img.size, (0, 0, 0, 0))
    draw = ImageDraw.Draw(overlay)
    bg = (v("bg_r"), v("bg_g"), v("bg_b"), v("bg_a"))
    fg = (v("fg_r"), v("fg_g"), v("fg_b"), v("fg_a"))
    draw.rectangle((px0, py0, px1 - 1, py1 - 1), fill=bg)

    border = 1 + v("font_weight") // 2
    for b in range(min(border, (px1 - px0) // 2, (py1 - py0) // 2)):
        draw.rectangle((px0 + b, py0 + b, px1 - 1 - b, py1 - 1 - b), outline=fg)

    # Dummy text: rows of glyph blocks, line height from font size,
    # horizontal offset from alignment (left / center / right).
    line_h = max(2, (v("font_size") * (py1 - py0)) // 512)
    pad = border + 2
    inner_w = px1 - px0 - 2 * pad
    inner_h = py1 - py0 - 2 * pad
    if inner_w > 4 and inner_h >= line_h:
        n_lines = max(1, inner_h // (2 * line_h))
        align = v("alignment") % 3
        for li in range(n_lines):
            gy = py0 + pad + li * 2 * line_h
            glyph_w = (inner_w * (2 + (li % 3))) // 4
            if align == 0:
                gx = px0 + pad
            elif align == 1:
                gx = px0 + pad + (inner_w - glyph_w) // 2
            else:
                gx = px1 - pad - glyph_w
            draw.rectangle((gx, gy, gx + glyph_w - 1, gy + line_h - 1), fill=fg)

    img.paste(Image.alpha_composite(img.convert("RGBA"), overlay).convert("RGB"))


def to_png_bytes(raster: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(raster).save(buf, format="PNG")
    return buf.getvalue()


def save_png(raster: np.ndarray, path) -> None:
    with open(path, "wb") as f:
        f.write(to_png_bytes(raster))
