/**
 * Orbit camera: yaw/pitch/distance around a target, producing a combined
 * view-projection matrix for the renderer. Column-major mat4, WebGL style.
 */

export class OrbitCamera {
  yaw = 0.8;
  pitch = 0.5;
  distance = 4;
  target: [number, number, number] = [0, 0, 0];
  fovY = Math.PI / 4;
  near = 0.01;
  far = 200;

  rotate(dx: number, dy: number): void {
    this.yaw += dx * 0.008;
    this.pitch = Math.min(Math.max(this.pitch + dy * 0.008, -1.45), 1.45);
  }

  zoom(delta: number): void {
    this.distance = Math.min(Math.max(this.distance * Math.exp(delta * 0.001), 0.05), 100);
  }

  eye(): [number, number, number] {
    const cp = Math.cos(this.pitch);
    return [
      this.target[0] + this.distance * cp * Math.cos(this.yaw),
      this.target[1] + this.distance * cp * Math.sin(this.yaw),
      this.target[2] + this.distance * Math.sin(this.pitch),
    ];
  }

  viewProjection(aspect: number): Float32Array {
    return mat4Multiply(perspective(this.fovY, aspect, this.near, this.far), this.view());
  }

  private view(): Float32Array {
    const eye = this.eye();
    const up: [number, number, number] = [0, 0, 1];
    const z = normalize(sub(eye, this.target)); // camera backward
    const x = normalize(cross(up, z));
    const y = cross(z, x);
    // column-major view matrix (inverse of the camera pose)
    return new Float32Array([
      x[0], y[0], z[0], 0,
      x[1], y[1], z[1], 0,
      x[2], y[2], z[2], 0,
      -dot(x, eye), -dot(y, eye), -dot(z, eye), 1,
    ]);
  }
}

type Vec3 = [number, number, number];

function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

function normalize(v: Vec3): Vec3 {
  const n = Math.hypot(v[0], v[1], v[2]) || 1;
  return [v[0] / n, v[1] / n, v[2] / n];
}

export function perspective(fovY: number, aspect: number, near: number, far: number): Float32Array {
  const f = 1 / Math.tan(fovY / 2);
  const out = new Float32Array(16);
  out[0] = f / aspect;
  out[5] = f;
  out[10] = (far + near) / (near - far);
  out[11] = -1;
  out[14] = (2 * far * near) / (near - far);
  return out;
}

export function mat4Multiply(a: Float32Array, b: Float32Array): Float32Array {
  const out = new Float32Array(16);
  for (let col = 0; col < 4; col++) {
    for (let row = 0; row < 4; row++) {
      let acc = 0;
      for (let k = 0; k < 4; k++) {
        acc += (a[k * 4 + row] ?? 0) * (b[col * 4 + k] ?? 0);
      }
      out[col * 4 + row] = acc;
    }
  }
  return out;
}
