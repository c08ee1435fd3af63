import time, numpy as np
from voxssc.config import ExperimentConfig
from voxssc.scenes import build_dataset
from voxssc.model import build_model
from voxssc.train import training_step, evaluate_model
from voxssc.autodiff import poly_lr
import voxssc.gru as gru_mod

def run(tag, gate_bias, epochs, n_train=200, n_eval=20):
    cfg = ExperimentConfig(train_scenes=n_train, eval_scenes=n_eval, epochs=epochs)
    # patch gate bias default
    orig = gru_mod.MSGRUParams.__init__.__defaults__
    gru_mod.MSGRUParams.__init__.__defaults__ = ((3,3,3), gate_bias)
    train_scenes = build_dataset(cfg, 'train'); eval_scenes = build_dataset(cfg, 'eval')
    model = build_model(cfg)
    train_preps = [model.prepare(s) for s in train_scenes]
    eval_preps = [model.prepare(s) for s in eval_scenes]
    total = cfg.epochs*len(train_preps); step=0
    t0=time.time()
    for ep in range(cfg.epochs):
        losses=[]
        for i in np.random.default_rng([cfg.seed,3,ep]).permutation(len(train_preps)):
            bd=training_step(model, train_preps[i], poly_lr(cfg.lr, step, total), np.random.default_rng([cfg.seed,2,step]))
            losses.append(bd.total); step+=1
        ref, coarse = evaluate_model(model, eval_preps)
        print('%s ep %d: loss %.3f | ref miou=%.3f sc=%.3f | coarse miou=%.3f sc=%.3f (%.0fs)' % (tag, ep, np.mean(losses), ref.ssc_miou, ref.sc_iou, coarse.ssc_miou, coarse.sc_iou, time.time()-t0), flush=True)
    gru_mod.MSGRUParams.__init__.__defaults__ = orig

run('bias-1.0', -1.0, 6)
run('bias-2.5', -2.5, 6)
