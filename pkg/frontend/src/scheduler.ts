// Debounced preview scheduling with latest-wins responses per slot.
//
// Edits call noteEdit(); once the canvas has been idle for `idleMs` the
// refresh callback fires. Every slot request carries a ticket; a response
// only applies if its ticket is still the newest for that slot, so a slow
// early response can never clobber a fresh one.

export class DebouncedTrigger {
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly run: () => void,
    readonly idleMs = 400,
  ) {
    if (idleMs > 500) throw new Error("preview debounce must fire within 500 ms of idle");
  }

  noteEdit(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      this.run();
    }, this.idleMs);
  }

  cancel(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
  }

  get pending(): boolean {
    return this.timer !== null;
  }
}

export class SlotTickets {
  private latest = new Map<number, number>();
  private counter = 0;

  issue(slot: number): number {
    this.counter += 1;
    this.latest.set(slot, this.counter);
    return this.counter;
  }

  /** True iff this ticket is still the newest issued for the slot. */
  shouldApply(slot: number, ticket: number): boolean {
    return this.latest.get(slot) === ticket;
  }
}
