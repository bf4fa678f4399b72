/** Euler-angle entry for the rotation controls.
 *
 * Users type three angles; the manipulation spec wants a 3x3 matrix.  We use
 * Z-Y-X intrinsic order (yaw about z, then pitch about y, then roll about x):
 * R = Rz(yaw) * Ry(pitch) * Rx(roll), angles in degrees.
 */

export type Mat3 = number[][];

const deg = Math.PI / 180;

export function rotationFromEuler(yawDeg: number, pitchDeg: number, rollDeg: number): Mat3 {
  const [cy, sy] = [Math.cos(yawDeg * deg), Math.sin(yawDeg * deg)];
  const [cp, sp] = [Math.cos(pitchDeg * deg), Math.sin(pitchDeg * deg)];
  const [cr, sr] = [Math.cos(rollDeg * deg), Math.sin(rollDeg * deg)];
  const rz: Mat3 = [
    [cy, -sy, 0],
    [sy, cy, 0],
    [0, 0, 1],
  ];
  const ry: Mat3 = [
    [cp, 0, sp],
    [0, 1, 0],
    [-sp, 0, cp],
  ];
  const rx: Mat3 = [
    [1, 0, 0],
    [0, cr, -sr],
    [0, sr, cr],
  ];
  return matMul(matMul(rz, ry), rx);
}

/** Recover Z-Y-X angles (degrees) from a rotation matrix; pitch in [-90, 90]. */
export function eulerFromRotation(r: Mat3): [number, number, number] {
  const sp = -r[2]![0]!;
  const pitch = Math.asin(Math.min(1, Math.max(-1, sp)));
  let yaw: number;
  let roll: number;
  if (Math.abs(sp) < 1 - 1e-9) {
    yaw = Math.atan2(r[1]![0]!, r[0]![0]!);
    roll = Math.atan2(r[2]![1]!, r[2]![2]!);
  } else {
    // gimbal lock: fold roll into yaw
    yaw = Math.atan2(-r[0]![1]!, r[1]![1]!);
    roll = 0;
  }
  return [yaw / deg, pitch / deg, roll / deg];
}

export function matMul(a: Mat3, b: Mat3): Mat3 {
  const out: Mat3 = [
    [0, 0, 0],
    [0, 0, 0],
    [0, 0, 0],
  ];
  for (let i = 0; i < 3; i++)
    for (let j = 0; j < 3; j++) {
      let s = 0;
      for (let k = 0; k < 3; k++) s += a[i]![k]! * b[k]![j]!;
      out[i]![j] = s;
    }
  return out;
}

export function transpose(a: Mat3): Mat3 {
  return [0, 1, 2].map((i) => [0, 1, 2].map((j) => a[j]![i]!));
}

export function identity(): Mat3 {
  return [
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
  ];
}

export function maxAbsDiff(a: Mat3, b: Mat3): number {
  let m = 0;
  for (let i = 0; i < 3; i++)
    for (let j = 0; j < 3; j++) m = Math.max(m, Math.abs(a[i]![j]! - b[i]![j]!));
  return m;
}
