/**
 * DOM wiring for the explorer: connect to a fieldfuse service, render the
 * scene's point cloud, and repaint it from query responses.
 */

import { ApiClient } from "./api.js";
import { OrbitCamera } from "./camera.js";
import { labelsToColorBuffer, labelToColor, scoresToColorBuffer } from "./colormap.js";
import { PointRenderer } from "./renderer.js";
import { ViewState } from "./state.js";

const DEFAULT_STRIDE = 1;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

async function boot(): Promise<void> {
  const canvas = el<HTMLCanvasElement>("viewport");
  const queryBox = el<HTMLInputElement>("query");
  const labelBox = el<HTMLInputElement>("labels");
  const engineerToggle = el<HTMLInputElement>("engineer");
  const historyList = el<HTMLUListElement>("history");
  const legendBar = el<HTMLDivElement>("legend");
  const banner = el<HTMLDivElement>("banner");

  const baseUrl = new URLSearchParams(location.search).get("api") ?? "http://127.0.0.1:8080";
  const api = new ApiClient(baseUrl);
  const renderer = new PointRenderer(canvas);
  const camera = new OrbitCamera();

  const showBanner = (text: string, reconnect = false) => {
    banner.textContent = reconnect ? `${text} — click to reconnect` : text;
    banner.hidden = false;
    banner.onclick = reconnect ? () => location.reload() : null;
  };

  let scenes;
  try {
    scenes = await api.listScenes();
  } catch {
    showBanner(`cannot reach ${baseUrl}`, true);
    return;
  }
  const scene = scenes[0];
  if (!scene) {
    showBanner("service has no scenes loaded");
    return;
  }
  const stride = Math.max(DEFAULT_STRIDE, Math.ceil(scene.num_points / 500_000));
  const cloud = await api.fetchCloud(scene.id, stride);
  renderer.setPositions(cloud.positions);
  fitCamera(camera, cloud.positions);
  renderer.setColors(new Float32Array(cloud.positions.length).fill(0.65));

  const state = new ViewState(api, scene.id, stride, {
    onHeatmap: (scores) => {
      banner.hidden = true;
      legendBar.replaceChildren();
      renderer.setColors(scoresToColorBuffer(scores));
      renderHistory();
    },
    onSegmentation: (labels, legend) => {
      banner.hidden = true;
      renderer.setColors(labelsToColorBuffer(labels));
      renderLegend(legend);
    },
    onError: (message) => showBanner(message),
    onOffline: () => showBanner(`lost connection to ${baseUrl}`, true),
  });

  const renderHistory = () => {
    historyList.replaceChildren(
      ...state.history.map((entry, i) => {
        const item = document.createElement("li");
        item.textContent = entry.text;
        item.onclick = () => void state.replay(i);
        return item;
      }),
    );
  };

  const renderLegend = (legend: string[]) => {
    legendBar.replaceChildren(
      ...legend.map((name, i) => {
        const chip = document.createElement("span");
        const c = labelToColor(i);
        chip.className = "chip";
        chip.style.background = `rgb(${c.r}, ${c.g}, ${c.b})`;
        chip.textContent = name;
        return chip;
      }),
    );
  };

  queryBox.onkeydown = (e) => {
    if (e.key === "Enter") {
      void state.runQuery(queryBox.value);
    }
  };
  labelBox.onkeydown = (e) => {
    if (e.key === "Enter") {
      const labels = labelBox.value.split(",").map((s) => s.trim()).filter(Boolean);
      void state.segmentView(labels, engineerToggle.checked);
    }
  };

  let dragging = false;
  canvas.onpointerdown = (e) => {
    dragging = true;
    canvas.setPointerCapture(e.pointerId);
  };
  canvas.onpointerup = () => {
    dragging = false;
  };
  canvas.onpointermove = (e) => {
    if (dragging) {
      camera.rotate(-e.movementX, e.movementY);
    }
  };
  canvas.onwheel = (e) => {
    e.preventDefault();
    camera.zoom(e.deltaY);
  };

  const frame = () => {
    renderer.draw(camera.viewProjection(canvas.clientWidth / Math.max(canvas.clientHeight, 1)));
    requestAnimationFrame(frame);
  };
  frame();
}

function fitCamera(camera: OrbitCamera, positions: Float32Array): void {
  if (positions.length === 0) {
    return;
  }
  const lo = [Infinity, Infinity, Infinity];
  const hi = [-Infinity, -Infinity, -Infinity];
  for (let i = 0; i < positions.length; i += 3) {
    for (let a = 0; a < 3; a++) {
      const v = positions[i + a] ?? 0;
      lo[a] = Math.min(lo[a]!, v);
      hi[a] = Math.max(hi[a]!, v);
    }
  }
  camera.target = [
    (lo[0]! + hi[0]!) / 2,
    (lo[1]! + hi[1]!) / 2,
    (lo[2]! + hi[2]!) / 2,
  ];
  camera.distance = Math.max(hi[0]! - lo[0]!, hi[1]! - lo[1]!, hi[2]! - lo[2]!, 0.1) * 1.8;
}

void boot();
