/**
 * Render plumbing: three.js scene, a minimal orbit camera, and the skinned
 * organ mesh with per-region tinting. All steering logic stays out of this
 * file; it only turns session state into pixels and screen rays into world
 * rays for the poke tool.
 */

import * as THREE from "three";
import { HelloMessage } from "./protocol";

const REGION_PALETTE = [0xe07a5f, 0x3d9970, 0x5b8dd9, 0xc9a227, 0x9a5bd9, 0x46b5a5];
const PINNED_COLOR = 0x8a8f98;

export interface WorldRay {
  origin: [number, number, number];
  direction: [number, number, number];
}

export class OrganView {
  private readonly renderer: THREE.WebGLRenderer;
  private readonly scene = new THREE.Scene();
  private readonly camera: THREE.PerspectiveCamera;
  private mesh: THREE.Mesh | null = null;
  private positions: THREE.BufferAttribute | null = null;
  private target = new THREE.Vector3();

  // Orbit state: spherical angles around the mesh center.
  private theta = Math.PI / 4;
  private phi = Math.PI / 3;
  private radius = 1;
  private dragging = false;
  private lastPointer = { x: 0, y: 0 };

  constructor(private readonly canvas: HTMLCanvasElement) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.renderer.setPixelRatio(window.devicePixelRatio);
    this.camera = new THREE.PerspectiveCamera(45, 1, 1e-4, 100);
    this.scene.background = new THREE.Color(0x14161a);
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.45));
    const key = new THREE.DirectionalLight(0xffffff, 1.1);
    key.position.set(1, 2, 1.5);
    this.scene.add(key);

    canvas.addEventListener("pointerdown", (e) => {
      this.dragging = true;
      this.lastPointer = { x: e.clientX, y: e.clientY };
      canvas.setPointerCapture(e.pointerId);
    });
    canvas.addEventListener("pointermove", (e) => {
      if (!this.dragging) return;
      const dx = e.clientX - this.lastPointer.x;
      const dy = e.clientY - this.lastPointer.y;
      this.lastPointer = { x: e.clientX, y: e.clientY };
      this.theta -= dx * 0.008;
      this.phi = Math.min(Math.PI - 0.05, Math.max(0.05, this.phi - dy * 0.008));
    });
    canvas.addEventListener("pointerup", (e) => {
      this.dragging = false;
      canvas.releasePointerCapture(e.pointerId);
    });
    canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      this.radius *= Math.exp(e.deltaY * 0.001);
    });

    new ResizeObserver(() => this.resize()).observe(canvas);
    this.resize();
  }

  /** True once a pointer drag is in progress (suppresses poke clicks). */
  get isDragging(): boolean {
    return this.dragging;
  }

  buildMesh(hello: HelloMessage): void {
    if (this.mesh) {
      this.scene.remove(this.mesh);
      this.mesh.geometry.dispose();
      (this.mesh.material as THREE.Material).dispose();
    }

    const verts = hello.mesh.vertices;
    const flat = new Float32Array(verts.length * 3);
    for (let v = 0; v < verts.length; v++) {
      flat[3 * v] = verts[v][0];
      flat[3 * v + 1] = verts[v][1];
      flat[3 * v + 2] = verts[v][2];
    }
    const index = new Uint32Array(hello.mesh.triangles.flat());

    // Tint each vertex by the region of its heaviest binding particle;
    // pinned regions get a flat gray so rigidity is visible at a glance.
    const pinned = new Set(hello.regions.filter((r) => r.pinned).map((r) => r.id));
    const colors = new Float32Array(verts.length * 3);
    const tint = new THREE.Color();
    for (let v = 0; v < verts.length; v++) {
      const weights = hello.binding.weights[v];
      let heavy = 0;
      for (let k = 1; k < weights.length; k++) {
        if (weights[k] > weights[heavy]) heavy = k;
      }
      const particle = hello.binding.indices[v][heavy];
      const region = hello.particle_regions[particle];
      tint.setHex(pinned.has(region) ? PINNED_COLOR : REGION_PALETTE[region % REGION_PALETTE.length]);
      colors[3 * v] = tint.r;
      colors[3 * v + 1] = tint.g;
      colors[3 * v + 2] = tint.b;
    }

    const geometry = new THREE.BufferGeometry();
    this.positions = new THREE.BufferAttribute(flat, 3);
    geometry.setAttribute("position", this.positions);
    geometry.setAttribute("color", new THREE.BufferAttribute(colors, 3));
    geometry.setIndex(new THREE.BufferAttribute(index, 1));
    geometry.computeVertexNormals();

    const material = new THREE.MeshStandardMaterial({
      vertexColors: true,
      roughness: 0.65,
      metalness: 0.05,
      side: THREE.DoubleSide,
    });
    this.mesh = new THREE.Mesh(geometry, material);
    this.scene.add(this.mesh);

    geometry.computeBoundingSphere();
    const sphere = geometry.boundingSphere!;
    this.target.copy(sphere.center);
    this.radius = Math.max(sphere.radius * 3, 1e-3);
  }

  updateVertices(skinned: Float64Array): void {
    if (!this.mesh || !this.positions) return;
    const array = this.positions.array as Float32Array;
    for (let i = 0; i < array.length; i++) array[i] = skinned[i];
    this.positions.needsUpdate = true;
    this.mesh.geometry.computeVertexNormals();
  }

  render(): void {
    const sinPhi = Math.sin(this.phi);
    this.camera.position.set(
      this.target.x + this.radius * sinPhi * Math.cos(this.theta),
      this.target.y + this.radius * Math.cos(this.phi),
      this.target.z + this.radius * sinPhi * Math.sin(this.theta),
    );
    this.camera.lookAt(this.target);
    this.renderer.render(this.scene, this.camera);
  }

  /** World-space ray under a client-pixel position. */
  rayAt(clientX: number, clientY: number): WorldRay {
    const rect = this.canvas.getBoundingClientRect();
    const ndc = new THREE.Vector2(
      ((clientX - rect.left) / rect.width) * 2 - 1,
      -(((clientY - rect.top) / rect.height) * 2 - 1),
    );
    const caster = new THREE.Raycaster();
    caster.setFromCamera(ndc, this.camera);
    const o = caster.ray.origin;
    const d = caster.ray.direction;
    return { origin: [o.x, o.y, o.z], direction: [d.x, d.y, d.z] };
  }

  private resize(): void {
    const width = this.canvas.clientWidth || 1;
    const height = this.canvas.clientHeight || 1;
    this.renderer.setSize(width, height, false);
    this.camera.aspect = width / height;
    this.camera.updateProjectionMatrix();
  }
}
