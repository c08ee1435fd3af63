import time
from voxssc.config import ExperimentConfig
from voxssc.scenes import build_dataset
from voxssc.model import build_model
from voxssc.train import train, evaluate_model

for seed in (1, 2, 3):
    t0 = time.time()
    cfg = ExperimentConfig(seed=seed)
    model, report, _ = train(cfg, f"/tmp/accept8_seed{seed}")
    eval_scenes = build_dataset(cfg, "eval")
    preps = [model.prepare(s) for s in eval_scenes]
    refined, coarse = evaluate_model(model, preps)
    print(f"seed {seed}: refined miou={refined.ssc_miou:.4f} sc={refined.sc_iou:.4f} | "
          f"coarse miou={coarse.ssc_miou:.4f} sc={coarse.sc_iou:.4f} | {time.time()-t0:.0f}s",
          flush=True)
