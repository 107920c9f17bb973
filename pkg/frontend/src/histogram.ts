/** Pure geometry for the grey-level histogram chart.
 *
 * Bars are computed from the server-provided weights and bin centres; the
 * studio never re-bins or re-normalises anything locally.
 */

export interface HistogramBar {
  x: number;
  y: number;
  width: number;
  height: number;
  weight: number;
  centre: number;
}

/** Lay out one bar per bin inside a chartWidth x chartHeight box.
 *
 * Bar heights are scaled so the tallest bin fills the chart; an all-zero
 * histogram yields zero-height bars.
 */
export function layoutHistogram(
  weights: number[],
  centres: number[],
  chartWidth: number,
  chartHeight: number,
): HistogramBar[] {
  if (weights.length !== centres.length) {
    throw new Error(
      `histogram has ${weights.length} weights but ${centres.length} centres`,
    );
  }
  const n = weights.length;
  if (n === 0) return [];
  const peak = Math.max(...weights);
  const barWidth = chartWidth / n;
  return weights.map((w, i) => {
    const h = peak > 0 ? (w / peak) * chartHeight : 0;
    return {
      x: i * barWidth,
      y: chartHeight - h,
      width: barWidth,
      height: h,
      weight: w,
      centre: centres[i],
    };
  });
}

/** Index of the bar under pixel x, or null outside the chart. */
export function barIndexAt(x: number, chartWidth: number, bins: number): number | null {
  if (bins <= 0 || x < 0 || x >= chartWidth) return null;
  return Math.min(bins - 1, Math.floor((x / chartWidth) * bins));
}

/** Tooltip text for a bar, echoing the server values verbatim. */
export function barTooltip(bar: HistogramBar): string {
  return `L = ${bar.centre.toFixed(1)}: ${(bar.weight * 100).toFixed(2)}%`;
}
