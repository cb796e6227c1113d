// Capture-frame decoder: the 1-bit raster format with an 8-byte header
// (magic "NNF1", width u16 LE, height u16 LE, packed rows MSB-first).

export interface DecodedFrame {
  width: number;
  height: number;
  rgba: Uint8ClampedArray<ArrayBuffer>;
  ts?: number;
}

export function decodeFrameBytes(bytes: Uint8Array): DecodedFrame {
  if (bytes.length < 8) throw new Error("frame too short");
  const magic = String.fromCharCode(bytes[0], bytes[1], bytes[2], bytes[3]);
  if (magic !== "NNF1") throw new Error(`bad frame magic ${magic}`);
  const width = bytes[4] | (bytes[5] << 8);
  const height = bytes[6] | (bytes[7] << 8);
  const rowBytes = Math.ceil(width / 8);
  if (bytes.length !== 8 + rowBytes * height) {
    throw new Error(`frame payload is ${bytes.length - 8} bytes, expected ${rowBytes * height}`);
  }
  const rgba = new Uint8ClampedArray(new ArrayBuffer(width * height * 4));
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const byte = bytes[8 + y * rowBytes + (x >> 3)];
      const on = (byte >> (7 - (x & 7))) & 1;
      const o = (y * width + x) * 4;
      // phosphor green on near-black
      rgba[o] = on ? 0x7f : 0x08;
      rgba[o + 1] = on ? 0xe8 : 0x10;
      rgba[o + 2] = on ? 0x9a : 0x0c;
      rgba[o + 3] = 0xff;
    }
  }
  return { width, height, rgba };
}

export function decodeFrame(base64: string): DecodedFrame {
  const binary = atob(base64);
  const bytes = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) bytes[i] = binary.charCodeAt(i);
  return decodeFrameBytes(bytes);
}
