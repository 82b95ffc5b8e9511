/**
 * Cockpit entry point. Connects to a running lapfov session service, renders
 * the cockpit (live view + error plots) to PPM snapshots, and steers the
 * tool either interactively (stdin commands) or from a script file.
 *
 * Script/stdin grammar, one command per line:
 *   <t_offset_s> drag <u> <v>
 *   <t_offset_s> release
 *   <t_offset_s> mrc on|off
 *   <t_offset_s> gain <name> <value>
 *   <t_offset_s> pause | resume
 * Interactive lines omit the time offset and run immediately.
 */

import * as fs from "node:fs";
import * as readline from "node:readline";

import { Canvas } from "./canvas.js";
import { SessionClient } from "./client.js";
import { renderPlots } from "./plots.js";
import { renderView } from "./view.js";

interface Args {
  host: string;
  port: number;
  script: string | null;
  out: string;
  duration: number;
  interactive: boolean;
}

function parseArgs(argv: string[]): Args {
  const args: Args = {
    host: "127.0.0.1",
    port: 8765,
    script: null,
    out: "cockpit.ppm",
    duration: 10,
    interactive: false,
  };
  for (let i = 0; i < argv.length; i++) {
    switch (argv[i]) {
      case "--host":
        args.host = argv[++i];
        break;
      case "--port":
        args.port = parseInt(argv[++i], 10);
        break;
      case "--script":
        args.script = argv[++i];
        break;
      case "--out":
        args.out = argv[++i];
        break;
      case "--duration":
        args.duration = parseFloat(argv[++i]);
        break;
      case "--interactive":
        args.interactive = true;
        break;
      default:
        throw new Error(`unknown argument ${argv[i]}`);
    }
  }
  return args;
}

export function applyCommand(client: SessionClient, parts: string[]): void {
  switch (parts[0]) {
    case "drag":
      client.sendDrag([parseFloat(parts[1]), parseFloat(parts[2])]);
      break;
    case "release":
      client.releaseDrag();
      break;
    case "mrc":
      client.setMrc(parts[1] === "on");
      break;
    case "gain":
      client.setGain(parts[1], parseFloat(parts[2]));
      break;
    case "pause":
      client.pause();
      break;
    case "resume":
      client.resume();
      break;
    default:
      throw new Error(`unknown command ${parts[0]}`);
  }
}

export function renderCockpit(client: SessionClient, nowMs: number): Canvas {
  const canvas = new Canvas(660, 500);
  canvas.clear([5, 5, 8]);
  renderView(canvas, client.state, { x: 10, y: 10, width: 320, height: 240 }, nowMs);
  renderPlots(canvas, client.state, { x: 10, y: 260, width: 640, height: 230 });
  return canvas;
}

async function main(): Promise<void> {
  const args = parseArgs(process.argv.slice(2));
  const client = new SessionClient({ host: args.host, port: args.port });
  await client.connect();
  console.log(`connected to ${args.host}:${args.port}`);

  if (args.script) {
    const lines = fs
      .readFileSync(args.script, "utf8")
      .split("\n")
      .map((l) => l.trim())
      .filter((l) => l && !l.startsWith("#"));
    for (const line of lines) {
      const parts = line.split(/\s+/);
      const at = parseFloat(parts[0]) * 1000;
      setTimeout(() => {
        try {
          applyCommand(client, parts.slice(1));
        } catch (err) {
          console.error(`script command failed: ${line}: ${err}`);
        }
      }, at);
    }
  }

  if (args.interactive) {
    const rl = readline.createInterface({ input: process.stdin });
    rl.on("line", (line) => {
      const parts = line.trim().split(/\s+/);
      if (!parts[0]) {
        return;
      }
      try {
        applyCommand(client, parts);
      } catch (err) {
        console.error(String(err));
      }
    });
  }

  const snapshotEvery = 1000;
  const timer = setInterval(() => {
    const canvas = renderCockpit(client, Date.now());
    fs.writeFileSync(args.out, canvas.toPpm());
  }, snapshotEvery);

  await new Promise((resolve) => setTimeout(resolve, args.duration * 1000));
  clearInterval(timer);
  fs.writeFileSync(args.out, renderCockpit(client, Date.now()).toPpm());

  const s = client.state.latestState;
  if (s) {
    console.log(
      `final: t=${s.t.toFixed(2)}s |e_p|=${Math.hypot(s.e_p[0], s.e_p[1]).toFixed(2)}px ` +
      `e_d=${s.e_d.toFixed(2)}mm V=${s.lyapunov.toFixed(4)} ` +
      `mis=${((s.misorientation * 180) / Math.PI).toFixed(2)}deg`,
    );
  }
  console.log(`history=${client.state.history.length} gaps=${client.state.gapCount}`);
  client.close();
}

const isDirectRun = process.argv[1]?.endsWith("main.js")
  || process.argv[1]?.endsWith("main.ts");
if (isDirectRun) {
  main().catch((err) => {
    console.error(String(err));
    process.exit(1);
  });
}
