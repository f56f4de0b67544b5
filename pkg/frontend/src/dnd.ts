// Drag-to-rank helpers. The index math is pure so it can be tested without
// a browser; attachDrag wires it to HTML5 drag events.

export interface Band {
  top: number;
  bottom: number;
}

// Which slot a drop at `y` lands in, given the vertical bands of the items
// already in the column: before the first midpoint it inserts at 0, past the
// last midpoint it appends.
export function dropIndex(bands: Band[], y: number): number {
  let index = 0;
  for (const band of bands) {
    const mid = (band.top + band.bottom) / 2;
    if (y < mid) return index;
    index += 1;
  }
  return index;
}

export function bandsOf(container: HTMLElement, selector: string): Band[] {
  return Array.from(container.querySelectorAll<HTMLElement>(selector)).map((el) => {
    const rect = el.getBoundingClientRect();
    return { top: rect.top, bottom: rect.bottom };
  });
}

export interface DragHandlers {
  onPlace(designId: string, index: number): void;
  onUnplace(designId: string): void;
}

export function attachDrag(card: HTMLElement, designId: string): void {
  card.draggable = true;
  card.addEventListener("dragstart", (ev) => {
    ev.dataTransfer?.setData("text/plain", designId);
    card.classList.add("dragging");
  });
  card.addEventListener("dragend", () => card.classList.remove("dragging"));
}

export function attachDropZone(zone: HTMLElement, itemSelector: string,
                               handlers: DragHandlers, ranked: boolean): void {
  zone.addEventListener("dragover", (ev) => {
    ev.preventDefault();
    zone.classList.add("drop-target");
  });
  zone.addEventListener("dragleave", () => zone.classList.remove("drop-target"));
  zone.addEventListener("drop", (ev) => {
    ev.preventDefault();
    zone.classList.remove("drop-target");
    const designId = ev.dataTransfer?.getData("text/plain");
    if (!designId) return;
    if (ranked) {
      handlers.onPlace(designId, dropIndex(bandsOf(zone, itemSelector), ev.clientY));
    } else {
      handlers.onUnplace(designId);
    }
  });
}
