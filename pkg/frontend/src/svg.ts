/** Minimal deterministic SVG chart scaffolding: fixed size, fixed
 * palette, linear and log10 axes with power-of-ten ticks. */

export const WIDTH = 640;
export const HEIGHT = 480;
export const MARGIN = { left: 70, right: 160, top: 30, bottom: 50 };

export const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
  "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

export interface Scale {
  (value: number): number;
  ticks(): { value: number; label: string }[];
}

function fmtPow10(exp: number): string {
  return `1e${exp}`;
}

export function logScale(min: number, max: number, pxLo: number, pxHi: number): Scale {
  const lo = Math.log10(min);
  const hi = Math.log10(max);
  const span = hi - lo || 1;
  const scale = ((value: number) =>
    pxLo + ((Math.log10(value) - lo) / span) * (pxHi - pxLo)) as Scale;
  scale.ticks = () => {
    const out: { value: number; label: string }[] = [];
    for (let e = Math.ceil(lo - 1e-9); e <= Math.floor(hi + 1e-9); e++) {
      out.push({ value: 10 ** e, label: fmtPow10(e) });
    }
    return out;
  };
  return scale;
}

export function linearScale(min: number, max: number, pxLo: number, pxHi: number): Scale {
  const span = max - min || 1;
  const scale = ((value: number) =>
    pxLo + ((value - min) / span) * (pxHi - pxLo)) as Scale;
  scale.ticks = () => {
    const out: { value: number; label: string }[] = [];
    const step = niceStep(span);
    for (let v = Math.ceil(min / step) * step; v <= max + 1e-12 * span; v += step) {
      const rounded = Math.abs(v) < 1e-12 * span ? 0 : v;
      out.push({ value: rounded, label: trimFloat(rounded) });
    }
    return out;
  };
  return scale;
}

function niceStep(span: number): number {
  const raw = span / 6;
  const mag = 10 ** Math.floor(Math.log10(raw));
  for (const m of [1, 2, 5, 10]) {
    if (raw <= m * mag) return m * mag;
  }
  return 10 * mag;
}

export function trimFloat(x: number): string {
  const s = x.toPrecision(6);
  return s.includes(".") ? s.replace(/\.?0+$/, "").replace(/\.?0+e/, "e") : s;
}

export function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export class SvgBuilder {
  private parts: string[] = [];

  rect(x: number, y: number, w: number, h: number, style: string): void {
    this.parts.push(
      `<rect x="${r(x)}" y="${r(y)}" width="${r(w)}" height="${r(h)}" style="${style}"/>`,
    );
  }

  line(x1: number, y1: number, x2: number, y2: number, style: string): void {
    this.parts.push(
      `<line x1="${r(x1)}" y1="${r(y1)}" x2="${r(x2)}" y2="${r(y2)}" style="${style}"/>`,
    );
  }

  polyline(points: [number, number][], color: string, dash = ""): void {
    const attr = points.map(([x, y]) => `${r(x)},${r(y)}`).join(" ");
    const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<polyline points="${attr}" fill="none" stroke="${color}" stroke-width="1.5"${dashAttr}/>`,
    );
  }

  circle(x: number, y: number, radius: number, color: string): void {
    this.parts.push(`<circle cx="${r(x)}" cy="${r(y)}" r="${radius}" fill="${color}"/>`);
  }

  text(x: number, y: number, content: string, style = "", anchor = "start"): void {
    this.parts.push(
      `<text x="${r(x)}" y="${r(y)}" text-anchor="${anchor}" ` +
      `font-family="sans-serif" font-size="12" style="${style}">${esc(content)}</text>`,
    );
  }

  render(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
      `viewBox="0 0 ${WIDTH} ${HEIGHT}">\n` +
      `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>\n` +
      this.parts.join("\n") +
      "\n</svg>\n"
    );
  }
}

function r(x: number): string {
  return (Math.round(x * 100) / 100).toString();
}

export function drawAxes(
  svg: SvgBuilder,
  xScale: Scale,
  yScale: Scale,
  xLabel: string,
  yLabel: string,
): void {
  const x0 = MARGIN.left;
  const x1 = WIDTH - MARGIN.right;
  const y0 = HEIGHT - MARGIN.bottom;
  const y1 = MARGIN.top;
  svg.line(x0, y0, x1, y0, "stroke:black");
  svg.line(x0, y0, x0, y1, "stroke:black");
  for (const t of xScale.ticks()) {
    const px = xScale(t.value);
    svg.line(px, y0, px, y0 + 5, "stroke:black");
    svg.line(px, y0, px, y1, "stroke:#dddddd");
    svg.text(px, y0 + 18, t.label, "", "middle");
  }
  for (const t of yScale.ticks()) {
    const py = yScale(t.value);
    svg.line(x0 - 5, py, x0, py, "stroke:black");
    svg.line(x0, py, x1, py, "stroke:#dddddd");
    svg.text(x0 - 8, py + 4, t.label, "", "end");
  }
  svg.text((x0 + x1) / 2, HEIGHT - 12, xLabel, "", "middle");
  svg.text(16, (y0 + y1) / 2, yLabel, "", "middle");
}

export function drawLegend(
  svg: SvgBuilder,
  entries: { label: string; color: string; dash?: string }[],
): void {
  const x = WIDTH - MARGIN.right + 12;
  let y = MARGIN.top + 8;
  for (const e of entries) {
    svg.line(x, y - 4, x + 22, y - 4, `stroke:${e.color};stroke-width:1.5` +
      (e.dash ? `;stroke-dasharray:${e.dash}` : ""));
    svg.text(x + 28, y, e.label);
    y += 18;
  }
}
