"""Image generation utilities for training-curve plots."""
import io
import math
from typing import Dict, List, Optional, Sequence, Tuple

from PIL import Image, ImageDraw, ImageFont


# Panel layout
PANEL_WIDTH = 420
PANEL_HEIGHT = 260
PANEL_MARGIN_LEFT = 70
PANEL_MARGIN_RIGHT = 15
PANEL_MARGIN_TOP = 30
PANEL_MARGIN_BOTTOM = 35
TICK_COUNT = 4

# Font sizes
FONT_SIZE = 10
TITLE_FONT_SIZE = 13

# Colors
BACKGROUND_COLOR = (255, 255, 255)
AXIS_COLOR = (96, 96, 96)
GRID_COLOR = (225, 225, 225)
TEXT_COLOR = (0, 0, 0)
BEST_EPOCH_COLOR = (200, 60, 60)
SERIES_COLORS = [(31, 119, 180), (255, 127, 14), (44, 160, 44), (148, 103, 189)]
LINE_WIDTH = 2

PADDING = 5

# Panels drawn for a training log: title -> series names
CURVE_PANELS = {
    "Loss": ["train_loss", "val_loss"],
    "Validation mean IC": ["val_mean_ic"],
    "Epsilon": ["epsilon"],
}


def get_font(size: int) -> ImageFont.FreeTypeFont:
    """Get a font for drawing text.

    Args:
        size: Font size

    Returns:
        ImageFont object
    """
    try:
        return ImageFont.truetype("/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf", size)
    except (OSError, IOError):
        try:
            return ImageFont.truetype("/System/Library/Fonts/Helvetica.ttc", size)
        except (OSError, IOError):
            return ImageFont.load_default()


def draw_text_centered(draw: ImageDraw.ImageDraw, position: Tuple[int, int, int, int],
                       text: str, font: ImageFont.FreeTypeFont, fill: Tuple[int, int, int]):
    """Draw text centered in a rectangle (x1, y1, x2, y2)."""
    x1, y1, x2, y2 = position
    bbox = draw.textbbox((0, 0), text, font=font)
    text_width = bbox[2] - bbox[0]
    text_height = bbox[3] - bbox[1]
    draw.text((x1 + (x2 - x1 - text_width) // 2, y1 + (y2 - y1 - text_height) // 2), text, font=font, fill=fill)


def value_range(series: Sequence[Sequence[Optional[float]]]) -> Tuple[float, float]:
    """Finite min and max over several series, widened when they coincide."""
    values = [v for s in series for v in s if v is not None and math.isfinite(v)]
    if not values:
        return 0.0, 1.0
    low, high = min(values), max(values)
    if high - low < 1e-12:
        pad = max(abs(low) * 0.05, 1e-3)
        return low - pad, high + pad
    return low, high


def _format_tick(value: float) -> str:
    if value != 0 and (abs(value) >= 1e4 or abs(value) < 1e-3):
        return f"{value:.1e}"
    return f"{value:.3f}"


def draw_panel(draw: ImageDraw.ImageDraw, origin: Tuple[int, int], title: str,
               series: Dict[str, List[Optional[float]]], best_epoch: Optional[int] = None):
    """Draw one line chart with its axes, legend and best-epoch marker.

    Args:
        draw: ImageDraw object
        origin: Top-left corner of the panel
        title: Panel heading
        series: Name -> per-epoch values (None values leave a gap)
        best_epoch: Epoch index to mark with a vertical line
    """
    x0, y0 = origin
    left = x0 + PANEL_MARGIN_LEFT
    right = x0 + PANEL_WIDTH - PANEL_MARGIN_RIGHT
    top = y0 + PANEL_MARGIN_TOP
    bottom = y0 + PANEL_HEIGHT - PANEL_MARGIN_BOTTOM
    font = get_font(FONT_SIZE)

    draw_text_centered(draw, (x0, y0, x0 + PANEL_WIDTH, top), title, get_font(TITLE_FONT_SIZE), TEXT_COLOR)
    low, high = value_range(list(series.values()))
    n_epochs = max((len(values) for values in series.values()), default=0)

    def to_pixel(epoch: int, value: float) -> Tuple[float, float]:
        x = left if n_epochs <= 1 else left + (right - left) * epoch / (n_epochs - 1)
        y = bottom - (bottom - top) * (value - low) / (high - low)
        return x, y

    for i in range(TICK_COUNT + 1):
        value = low + (high - low) * i / TICK_COUNT
        _, y = to_pixel(0, value)
        draw.line([(left, y), (right, y)], fill=GRID_COLOR, width=1)
        draw.text((x0 + PADDING, y - FONT_SIZE // 2), _format_tick(value), font=font, fill=TEXT_COLOR)
    draw.rectangle([left, top, right, bottom], outline=AXIS_COLOR, width=1)
    draw_text_centered(draw, (left, bottom, right, y0 + PANEL_HEIGHT), f"epoch (1-{n_epochs})", font, TEXT_COLOR)

    if best_epoch is not None and n_epochs > 1:
        bx, _ = to_pixel(best_epoch, low)
        draw.line([(bx, top), (bx, bottom)], fill=BEST_EPOCH_COLOR, width=1)

    for idx, (name, values) in enumerate(series.items()):
        color = SERIES_COLORS[idx % len(SERIES_COLORS)]
        segment: List[Tuple[float, float]] = []
        for epoch, value in enumerate(values):
            if value is None or not math.isfinite(value):
                if len(segment) > 1:
                    draw.line(segment, fill=color, width=LINE_WIDTH)
                segment = []
                continue
            segment.append(to_pixel(epoch, value))
        if len(segment) > 1:
            draw.line(segment, fill=color, width=LINE_WIDTH)
        elif len(segment) == 1:
            px, py = segment[0]
            draw.ellipse([px - 2, py - 2, px + 2, py + 2], fill=color)
        draw.text((right - 110, top + PADDING + idx * (FONT_SIZE + 4)), name, font=font, fill=color)


def generate_training_curves(series: Dict[str, List[Optional[float]]],
                             best_epoch: Optional[int] = None) -> io.BytesIO:
    """Render the training diagnostics as a column of line charts.

    Args:
        series: Series name -> per-epoch values, e.g. from ``TrainingLog.series``
        best_epoch: Epoch whose parameters were kept

    Returns:
        BytesIO object containing the PNG image
    """
    panels = [(title, {name: series[name] for name in names if name in series})
              for title, names in CURVE_PANELS.items()]
    panels = [(title, chosen) for title, chosen in panels if chosen]
    if not panels:
        img = Image.new('RGB', (PANEL_WIDTH, 100), color=BACKGROUND_COLOR)
        draw = ImageDraw.Draw(img)
        draw_text_centered(draw, (0, 0, PANEL_WIDTH, 100), "No training records", get_font(FONT_SIZE), TEXT_COLOR)
    else:
        img = Image.new('RGB', (PANEL_WIDTH, PANEL_HEIGHT * len(panels)), color=BACKGROUND_COLOR)
        draw = ImageDraw.Draw(img)
        for idx, (title, chosen) in enumerate(panels):
            draw_panel(draw, (0, idx * PANEL_HEIGHT), title, chosen, best_epoch)

    buffer = io.BytesIO()
    img.save(buffer, format='PNG', optimize=True)
    buffer.seek(0)
    return buffer
