/** Similarity-profile bar chart geometry: the model's K fusion weights are its
 * interpretability story, so they get their own panel. Pure geometry here; the
 * canvas wrapper lives in app.ts. */

export interface Bar {
  x: number;
  y: number;
  width: number;
  height: number;
  weight: number;
}

export function similarityBars(
  weights: number[],
  panelWidth: number,
  panelHeight: number,
  gap = 2,
): Bar[] {
  if (weights.length === 0) return [];
  const maxWeight = Math.max(...weights);
  const barWidth = (panelWidth - gap * (weights.length + 1)) / weights.length;
  return weights.map((w, i) => {
    const h = maxWeight > 0 ? (w / maxWeight) * (panelHeight - 2) : 0;
    return {
      x: gap + i * (barWidth + gap),
      y: panelHeight - h,
      width: barWidth,
      height: h,
      weight: w,
    };
  });
}
