/** Replay cursor over a downloaded event log.
 *
 * The index counts applied events: 0 is the empty state and `count` the
 * final state, so the slider maps 1:1 onto it. Snapshots come from a local
 * fold with periodic checkpoints, which keeps backward scrubbing cheap.
 */

import { ClientSnapshot, applyEvent, copySnapshot, emptySnapshot } from "./fold.js";
import type { EventWire } from "./types.js";

const CHECKPOINT_INTERVAL = 250;

export class ReplayCursor {
  index = 0;

  private checkpoints: ClientSnapshot[] = [emptySnapshot()];
  private current: ClientSnapshot = emptySnapshot();

  constructor(
    readonly events: EventWire[],
    private readonly interval: number = CHECKPOINT_INTERVAL,
  ) {
    if (interval <= 0) throw new RangeError("checkpoint interval must be positive");
  }

  get count(): number {
    return this.events.length;
  }

  /** Last applied event's position, or -1 at the empty state. */
  get position(): number {
    return this.index - 1;
  }

  get snapshot(): ClientSnapshot {
    return this.current;
  }

  seekTo(index: number): ClientSnapshot {
    const target = Math.max(0, Math.min(this.count, index));
    let base = this.current;
    if (target < base.index) {
      // checkpoints are contiguous up to the furthest index visited, so
      // the slot below any previously reached target always exists
      const slot = Math.min(
        Math.floor(target / this.interval),
        this.checkpoints.length - 1,
      );
      base = copySnapshot(this.checkpoints[slot]!);
    }
    for (let i = base.index; i < target; i += 1) {
      applyEvent(base, this.events[i]!);
      this.maybeCheckpoint(base);
    }
    this.current = base;
    this.index = target;
    return this.current;
  }

  stepForward(): ClientSnapshot {
    return this.seekTo(this.index + 1);
  }

  stepBack(): ClientSnapshot {
    return this.seekTo(this.index - 1);
  }

  toEnd(): ClientSnapshot {
    return this.seekTo(this.count);
  }

  private maybeCheckpoint(snap: ClientSnapshot): void {
    if (snap.index % this.interval !== 0) return;
    const slot = snap.index / this.interval;
    if (slot === this.checkpoints.length) {
      this.checkpoints.push(copySnapshot(snap));
    }
  }
}
