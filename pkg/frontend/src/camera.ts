/** Orbit-camera construction matching the service's pose conventions:
 * world-from-camera 4x4, camera looks along -z with +x right / +y up,
 * world +z up.
 */

import type { CameraJson } from "./api.js";

export interface Orbit {
  azimuthDeg: number;
  elevationDeg: number;
  radius: number;
  target: [number, number, number];
}

const deg = Math.PI / 180;

function sub(a: number[], b: number[]): number[] {
  return [a[0]! - b[0]!, a[1]! - b[1]!, a[2]! - b[2]!];
}

function cross(a: number[], b: number[]): number[] {
  return [
    a[1]! * b[2]! - a[2]! * b[1]!,
    a[2]! * b[0]! - a[0]! * b[2]!,
    a[0]! * b[1]! - a[1]! * b[0]!,
  ];
}

function normalize(a: number[]): number[] {
  const n = Math.hypot(a[0]!, a[1]!, a[2]!);
  return [a[0]! / n, a[1]! / n, a[2]! / n];
}

export function orbitEye(orbit: Orbit): [number, number, number] {
  const az = orbit.azimuthDeg * deg;
  const el = orbit.elevationDeg * deg;
  const r = orbit.radius;
  return [
    orbit.target[0] + r * Math.cos(el) * Math.cos(az),
    orbit.target[1] + r * Math.cos(el) * Math.sin(az),
    orbit.target[2] + r * Math.sin(el),
  ];
}

export function orbitCamera(orbit: Orbit, resolution: number, fovDeg = 50): CameraJson {
  const eye = orbitEye(orbit);
  const zAxis = normalize(sub(eye, orbit.target as unknown as number[]));
  const xAxis = normalize(cross([0, 0, 1], zAxis));
  const yAxis = cross(zAxis, xAxis);
  const pose = [
    [xAxis[0]!, yAxis[0]!, zAxis[0]!, eye[0]!],
    [xAxis[1]!, yAxis[1]!, zAxis[1]!, eye[1]!],
    [xAxis[2]!, yAxis[2]!, zAxis[2]!, eye[2]!],
    [0, 0, 0, 1],
  ];
  const f = (0.5 * resolution) / Math.tan(0.5 * fovDeg * deg);
  return {
    fx: f,
    fy: f,
    cx: resolution / 2,
    cy: resolution / 2,
    width: resolution,
    height: resolution,
    pose,
  };
}
