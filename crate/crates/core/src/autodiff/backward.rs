//! Reverse pass.
//!
//! Every vector-Jacobian product is written with [`Var`] operations, so the
//! same rules serve both modes. With `create_graph` the products are
//! recorded on the forward graph itself and the returned gradients can be
//! differentiated again. Without it they are evaluated on a scratch graph
//! whose leaves share storage with the forward values, and the results come
//! back as detached leaves.

use std::collections::HashMap;

use super::graph::{Graph, NodeId, Op, Var};
use crate::error::{Error, Result};

struct Sink<'s> {
    graph: &'s Graph,
    same: bool,
    imported: HashMap<NodeId, Var<'s>>,
}

impl<'s> Sink<'s> {
    /// The forward node `id` as seen from the sink graph.
    fn fwd(&mut self, source: &Graph, id: NodeId) -> Var<'s> {
        if self.same {
            return Var {
                graph: self.graph,
                id,
            };
        }
        let graph = self.graph;
        *self
            .imported
            .entry(id)
            .or_insert_with(|| graph.push_shared(Op::Leaf, source.value(id)))
    }
}

impl Graph {
    /// Gradients of the scalar `output` with respect to each of `wrt`.
    ///
    /// With `create_graph` the returned vars are recorded on this graph and
    /// are themselves differentiable. Otherwise they are detached leaves.
    /// A `wrt` entry the output does not depend on is an error, never a
    /// silent zero.
    pub fn grad<'g>(
        &'g self,
        output: Var<'g>,
        wrt: &[Var<'g>],
        create_graph: bool,
    ) -> Result<Vec<Var<'g>>> {
        for v in wrt {
            if !std::ptr::eq(v.graph, self) {
                return Err(Error::ForeignGraph);
            }
        }
        if !std::ptr::eq(output.graph, self) {
            return Err(Error::ForeignGraph);
        }
        if create_graph {
            let mut sink = Sink {
                graph: self,
                same: true,
                imported: HashMap::new(),
            };
            self.backward(&mut sink, output.id, wrt)
        } else {
            let scratch = Graph::new();
            let grads = {
                let mut sink = Sink {
                    graph: &scratch,
                    same: false,
                    imported: HashMap::new(),
                };
                self.backward(&mut sink, output.id, wrt)?
                    .into_iter()
                    .map(|g| g.value())
                    .collect::<Vec<_>>()
            };
            Ok(grads
                .into_iter()
                .map(|value| self.push_shared(Op::Leaf, value))
                .collect())
        }
    }

    /// First-order gradients as detached tensors.
    pub fn grad_values<'g>(
        &'g self,
        output: Var<'g>,
        wrt: &[Var<'g>],
    ) -> Result<Vec<super::Tensor>> {
        Ok(self
            .grad(output, wrt, false)?
            .into_iter()
            .map(|v| v.tensor())
            .collect())
    }

    fn backward<'s>(
        &self,
        sink: &mut Sink<'s>,
        output: NodeId,
        wrt: &[Var<'_>],
    ) -> Result<Vec<Var<'s>>> {
        let out_shape = self.value(output).shape().to_vec();
        if out_shape != [1, 1] {
            return Err(Error::NonScalarOutput(out_shape));
        }

        let len = output + 1;
        let mut is_wrt = vec![false; len];
        let mut relevant = vec![false; len];
        for v in wrt {
            if v.id > output {
                return Err(Error::Disconnected(v.id));
            }
            is_wrt[v.id] = true;
            relevant[v.id] = true;
        }
        let first = wrt.iter().map(|v| v.id).min().unwrap_or(len);
        for id in first..len {
            if !relevant[id] {
                relevant[id] = self
                    .op(id)
                    .inputs()
                    .iter()
                    .flatten()
                    .any(|&i| relevant[i]);
            }
        }

        let mut grads: Vec<Option<Var<'s>>> = vec![None; len];
        if relevant[output] {
            grads[output] = Some(sink.graph.scalar(1.0));
        }

        for id in (first..len).rev() {
            if !relevant[id] {
                continue;
            }
            let g = if is_wrt[id] {
                grads[id]
            } else {
                grads[id].take()
            };
            let Some(g) = g else { continue };
            let op = self.op(id);
            for (slot, input) in op.inputs().into_iter().enumerate() {
                let Some(input) = input else { continue };
                if !relevant[input] {
                    continue;
                }
                let contrib = self.vjp(sink, op, id, slot, g)?;
                grads[input] = Some(match grads[input] {
                    Some(acc) => acc.add(&contrib)?,
                    None => contrib,
                });
            }
        }

        wrt.iter()
            .map(|v| grads[v.id].ok_or(Error::Disconnected(v.id)))
            .collect()
    }

    /// Contribution of `g` (the gradient at node `id`) to input `slot`.
    fn vjp<'s>(
        &self,
        sink: &mut Sink<'s>,
        op: Op,
        id: NodeId,
        slot: usize,
        g: Var<'s>,
    ) -> Result<Var<'s>> {
        use Op::*;
        let sg = sink.graph;
        Ok(match op {
            Leaf => unreachable!("leaves have no inputs"),
            MatMul(a, b) => {
                if slot == 0 {
                    let b = sink.fwd(self, b);
                    g.matmul(&b.transpose())?
                } else {
                    let a = sink.fwd(self, a);
                    a.transpose().matmul(&g)?
                }
            }
            Transpose(_) => g.transpose(),
            Add(..) => g,
            Sub(..) => {
                if slot == 0 {
                    g
                } else {
                    g.neg()
                }
            }
            Mul(a, b) => {
                let other = sink.fwd(self, if slot == 0 { b } else { a });
                g.mul(&other)?
            }
            AddBias(..) => {
                if slot == 0 {
                    g
                } else {
                    g.sum_rows()
                }
            }
            SumRows(a) => g.broadcast_rows(self.value(a).nrows())?,
            BroadcastRows(..) => g.sum_rows(),
            SumCols(a) => g.broadcast_cols(self.value(a).ncols())?,
            BroadcastCols(..) => g.sum_cols(),
            Sum(a) => {
                let (r, c) = self.value(a).dim();
                g.broadcast_scalar(r, c)?
            }
            BroadcastScalar(..) => g.sum(),
            Scale(_, c) => g.scale(c),
            AddScalar(..) => g,
            Concat(a, b) => {
                let left = self.value(a).ncols();
                let right = self.value(b).ncols();
                if slot == 0 {
                    g.slice_cols(0, left)?
                } else {
                    g.slice_cols(left, left + right)?
                }
            }
            SliceCols(a, start, _) => g.pad_cols(start, self.value(a).ncols())?,
            PadCols(a, left, _) => g.slice_cols(left, left + self.value(a).ncols())?,
            Relu(a) => {
                let mask = self.value(a).mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
                g.mul(&sg.constant(mask))?
            }
            // The derivative at exactly 0 is taken as `alpha`.
            LeakyRelu(a, alpha) => {
                let mask = self.value(a).mapv(|x| if x > 0.0 { 1.0 } else { alpha });
                g.mul(&sg.constant(mask))?
            }
            Silu(a) => {
                // silu'(x) = σ(x) + x σ(x) (1 − σ(x))
                let x = sink.fwd(self, a);
                let sig = x.sigmoid();
                let one_minus = sig.neg().add_scalar(1.0);
                let deriv = sig.add(&x.mul(&sig.mul(&one_minus)?)?)?;
                g.mul(&deriv)?
            }
            Sigmoid(_) => {
                let y = sink.fwd(self, id);
                let deriv = y.mul(&y.neg().add_scalar(1.0))?;
                g.mul(&deriv)?
            }
            Tanh(_) => {
                let y = sink.fwd(self, id);
                g.mul(&y.square().neg().add_scalar(1.0))?
            }
            Exp(_) => {
                let y = sink.fwd(self, id);
                g.mul(&y)?
            }
            Square(a) => {
                let x = sink.fwd(self, a);
                g.mul(&x.scale(2.0))?
            }
            NormRows(a) => {
                // d‖x‖/dx = x / ‖x‖, and 0 at the origin.
                let x = sink.fwd(self, a);
                let norm = sink.fwd(self, id);
                let cols = x.dim().1;
                g.mul(&norm.safe_recip())?.broadcast_cols(cols)?.mul(&x)?
            }
            SafeRecip(_) => {
                let y = sink.fwd(self, id);
                g.mul(&y.square().neg())?
            }
        })
    }
}
