/** Newline-delimited JSON framing for the wire protocol. */

export function encodeLine(value: unknown): string {
  return `${JSON.stringify(value)}\n`;
}

/**
 * Incremental line splitter for a byte/character stream.
 *
 * TCP delivers arbitrary chunks; push() buffers partial lines and returns
 * only the complete ones, without their trailing newline.
 */
export class LineSplitter {
  private buffer = "";

  push(chunk: string): string[] {
    this.buffer += chunk;
    const lines: string[] = [];
    for (;;) {
      const idx = this.buffer.indexOf("\n");
      if (idx === -1) break;
      lines.push(this.buffer.slice(0, idx));
      this.buffer = this.buffer.slice(idx + 1);
    }
    return lines;
  }

  /** Whatever is left without a newline (useful on stream end). */
  rest(): string {
    return this.buffer;
  }
}
