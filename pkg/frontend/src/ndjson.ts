// Incremental NDJSON decoding: feed arbitrary text chunks, get complete
// parsed lines out. Blank lines are stream keepalives and are swallowed.

export class NdjsonBuffer<T> {
  private pending = "";

  feed(chunk: string): T[] {
    this.pending += chunk;
    const out: T[] = [];
    for (;;) {
      const newline = this.pending.indexOf("\n");
      if (newline < 0) break;
      const line = this.pending.slice(0, newline).trim();
      this.pending = this.pending.slice(newline + 1);
      if (!line) continue;
      out.push(JSON.parse(line) as T);
    }
    return out;
  }

  get buffered(): string {
    return this.pending;
  }
}
