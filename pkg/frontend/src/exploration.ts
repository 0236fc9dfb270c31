// Exploration controls: mixing depth slider, base seed, pinned variants.

export const DEFAULT_MIX_LAYERS = 8;

export class ExplorationState {
  readonly layerCount: number;
  private mix: number;
  baseSeed = 0;
  variantCount = 3;
  lastFidelity: number | null = null;
  private pinned = new Set<number>();

  constructor(layerCount: number) {
    this.layerCount = layerCount;
    this.mix = Math.min(DEFAULT_MIX_LAYERS, layerCount);
  }

  get mixLayers(): number {
    return this.mix;
  }

  set mixLayers(value: number) {
    if (!Number.isInteger(value) || value < 0 || value > this.layerCount) {
      throw new Error(`mix layers must be in [0, ${this.layerCount}]`);
    }
    this.mix = value;
  }

  /** Per-slot request seed: one slot, one reproducible stream. */
  slotSeed(slot: number): number {
    return this.baseSeed * 1000 + slot;
  }

  pin(slot: number): void {
    this.pinned.add(slot);
  }

  unpin(slot: number): void {
    this.pinned.delete(slot);
  }

  togglePin(slot: number): boolean {
    if (this.pinned.has(slot)) this.pinned.delete(slot);
    else this.pinned.add(slot);
    return this.pinned.has(slot);
  }

  isPinned(slot: number): boolean {
    return this.pinned.has(slot);
  }

  /** Slots that should be (re)requested after an edit or control change. */
  activeSlots(): number[] {
    const slots: number[] = [];
    for (let s = 0; s < this.variantCount; s++) {
      if (!this.pinned.has(s)) slots.push(s);
    }
    return slots;
  }
}
