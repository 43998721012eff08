//! Linear-elastic 3D frame solver with prismatic Euler–Bernoulli elements.
//!
//! Each node carries six DOFs `(ux, uy, uz, rx, ry, rz)`. Element local `x`
//! runs from `node_a` to `node_b`; local `y` follows the section height `b`
//! (strong axis, `inertia_z`), local `z` the section thickness `t` (weak
//! axis, `inertia_y`).

use std::collections::BTreeMap;
use std::fmt::Write;

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kv::fmt_f64;
use crate::model::Material;

pub type Matrix12 = SMatrix<f64, 12, 12>;

/// Probe names every joint model must define.
pub const REQUIRED_PROBES: [&str; 3] = ["N1", "N4", "RCM"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub node_a: usize,
    pub node_b: usize,
    /// mm²
    pub area: f64,
    /// Weak-axis second moment (bending across the thickness), mm⁴.
    pub inertia_y: f64,
    /// Strong-axis second moment, mm⁴.
    pub inertia_z: f64,
    /// St.-Venant torsion constant, mm⁴.
    pub torsion_constant: f64,
    /// Section extent along local y, mm.
    pub section_height: f64,
    /// Section extent along local z, mm.
    pub section_thickness: f64,
    pub material: Material,
    pub local_axis_hint: [f64; 3],
    /// Whether the element takes part in peak-stress reporting.
    pub stress_checked: bool,
}

impl Element {
    /// Solid rectangular section `height x thickness`.
    pub fn rectangular(
        node_a: usize,
        node_b: usize,
        height: f64,
        thickness: f64,
        material: Material,
        local_axis_hint: [f64; 3],
    ) -> Self {
        Element {
            node_a,
            node_b,
            area: height * thickness,
            inertia_y: height * thickness.powi(3) / 12.0,
            inertia_z: thickness * height.powi(3) / 12.0,
            torsion_constant: rect_torsion_constant(height, thickness),
            section_height: height,
            section_thickness: thickness,
            material,
            local_axis_hint,
            stress_checked: true,
        }
    }

    pub fn unchecked(mut self) -> Self {
        self.stress_checked = false;
        self
    }
}

/// Thin-rectangle torsion constant `l s³ (1/3 − 0.21 (s/l)(1 − s⁴/12l⁴))`.
pub fn rect_torsion_constant(b: f64, t: f64) -> f64 {
    let (s, l) = if b < t { (b, t) } else { (t, b) };
    let r = s / l;
    l * s.powi(3) * (1.0 / 3.0 - 0.21 * r * (1.0 - r.powi(4) / 12.0))
}

/// Nodal force/moment vector `(Fx, Fy, Fz, Mx, My, Mz)` in N and N·mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodalLoad {
    pub node: usize,
    pub force: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameModel {
    pub nodes: Vec<[f64; 3]>,
    pub elements: Vec<Element>,
    /// Fixed DOF mask per node.
    pub constraints: BTreeMap<usize, [bool; 6]>,
    pub probes: BTreeMap<String, usize>,
}

impl FrameModel {
    pub fn add_node(&mut self, p: [f64; 3]) -> usize {
        self.nodes.push(p);
        self.nodes.len() - 1
    }

    pub fn fix(&mut self, node: usize, mask: [bool; 6]) {
        let e = self.constraints.entry(node).or_insert([false; 6]);
        for i in 0..6 {
            e[i] |= mask[i];
        }
    }

    pub fn fix_all(&mut self, node: usize) {
        self.fix(node, [true; 6]);
    }

    pub fn probe(&self, name: &str) -> Result<usize> {
        self.probes
            .get(name)
            .copied()
            .ok_or_else(|| Error::Model(format!("probe `{name}` is not defined")))
    }

    pub fn dof_count(&self) -> usize {
        6 * self.nodes.len()
    }

    pub fn element_length(&self, e: &Element) -> f64 {
        (Vector3::from(self.nodes[e.node_b]) - Vector3::from(self.nodes[e.node_a])).norm()
    }

    /// Structural checks shared by every model.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Model("non-finite node coordinate".into()));
        }
        for (i, e) in self.elements.iter().enumerate() {
            if e.node_a >= self.nodes.len() || e.node_b >= self.nodes.len() {
                return Err(Error::Model(format!(
                    "element {i} references a missing node"
                )));
            }
            if e.node_a == e.node_b {
                return Err(Error::Model(format!(
                    "element {i} connects a node to itself"
                )));
            }
            let l = self.element_length(e);
            if !(l > 1e-12) {
                return Err(Error::Model(format!("element {i} has zero length")));
            }
            let props = [
                e.area,
                e.inertia_y,
                e.inertia_z,
                e.torsion_constant,
                e.section_height,
                e.section_thickness,
            ];
            if props.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
                return Err(Error::Model(format!(
                    "element {i} has a non-positive section property"
                )));
            }
            e.material.validate()?;
        }
        for node in self.constraints.keys() {
            if *node >= self.nodes.len() {
                return Err(Error::Model(format!("constraint on missing node {node}")));
            }
        }
        let fixed: usize = self
            .constraints
            .values()
            .map(|m| m.iter().filter(|b| **b).count())
            .sum();
        if fixed < 6 {
            return Err(Error::Model(format!(
                "only {fixed} constrained DOFs; at least 6 are needed"
            )));
        }
        for (name, node) in &self.probes {
            if *node >= self.nodes.len() {
                return Err(Error::Model(format!(
                    "probe `{name}` points at missing node {node}"
                )));
            }
        }
        Ok(())
    }

    /// [`validate`](Self::validate) plus the N1/N4/RCM probe requirement.
    pub fn validate_joint(&self) -> Result<()> {
        self.validate()?;
        for name in REQUIRED_PROBES {
            self.probe(name)?;
        }
        Ok(())
    }

    /// Writes the sectioned text format read by [`FrameModel::from_text`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("[nodes]\n# id x y z\n");
        for (i, p) in self.nodes.iter().enumerate() {
            writeln!(
                s,
                "{i} {} {} {}",
                fmt_f64(p[0]),
                fmt_f64(p[1]),
                fmt_f64(p[2])
            )
            .unwrap();
        }
        s.push_str("\n[elements]\n# a b area Iy Iz J height thickness E yield nu hint_x hint_y hint_z checked\n");
        for e in &self.elements {
            let vals = [
                e.area,
                e.inertia_y,
                e.inertia_z,
                e.torsion_constant,
                e.section_height,
                e.section_thickness,
                e.material.young_modulus,
                e.material.yield_stress,
                e.material.poisson_ratio,
                e.local_axis_hint[0],
                e.local_axis_hint[1],
                e.local_axis_hint[2],
            ];
            write!(s, "{} {}", e.node_a, e.node_b).unwrap();
            for v in vals {
                write!(s, " {}", fmt_f64(v)).unwrap();
            }
            writeln!(s, " {}", u8::from(e.stress_checked)).unwrap();
        }
        s.push_str("\n[constraints]\n# node mask(ux uy uz rx ry rz)\n");
        for (node, mask) in &self.constraints {
            let m: String = mask.iter().map(|b| if *b { '1' } else { '0' }).collect();
            writeln!(s, "{node} {m}").unwrap();
        }
        s.push_str("\n[probes]\n");
        for (name, node) in &self.probes {
            writeln!(s, "{name} {node}").unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut model = FrameModel::default();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                section = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::parse(line_no, "unterminated section header"))?
                    .trim()
                    .to_string();
                if !["nodes", "elements", "constraints", "probes"].contains(&section.as_str()) {
                    return Err(Error::parse(
                        line_no,
                        format!("unknown section [{section}]"),
                    ));
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let num = |i: usize| -> Result<f64> {
                fields[i]
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        Error::parse(line_no, format!("`{}` is not a finite number", fields[i]))
                    })
            };
            let index = |i: usize| -> Result<usize> {
                fields[i]
                    .parse::<usize>()
                    .map_err(|_| Error::parse(line_no, format!("`{}` is not a node id", fields[i])))
            };
            let expect = |n: usize| -> Result<()> {
                if fields.len() != n {
                    Err(Error::parse(
                        line_no,
                        format!("expected {n} fields in [{section}], got {}", fields.len()),
                    ))
                } else {
                    Ok(())
                }
            };
            match section.as_str() {
                "nodes" => {
                    expect(4)?;
                    if index(0)? != model.nodes.len() {
                        return Err(Error::parse(line_no, "node ids must be consecutive from 0"));
                    }
                    model.nodes.push([num(1)?, num(2)?, num(3)?]);
                }
                "elements" => {
                    expect(15)?;
                    let checked = match fields[14] {
                        "1" => true,
                        "0" => false,
                        other => {
                            return Err(Error::parse(
                                line_no,
                                format!("checked flag `{other}` must be 0 or 1"),
                            ))
                        }
                    };
                    model.elements.push(Element {
                        node_a: index(0)?,
                        node_b: index(1)?,
                        area: num(2)?,
                        inertia_y: num(3)?,
                        inertia_z: num(4)?,
                        torsion_constant: num(5)?,
                        section_height: num(6)?,
                        section_thickness: num(7)?,
                        material: Material {
                            young_modulus: num(8)?,
                            yield_stress: num(9)?,
                            elongation_at_break: Material::PA12.elongation_at_break,
                            poisson_ratio: num(10)?,
                        },
                        local_axis_hint: [num(11)?, num(12)?, num(13)?],
                        stress_checked: checked,
                    });
                }
                "constraints" => {
                    expect(2)?;
                    let node = index(0)?;
                    let chars: Vec<char> = fields[1].chars().collect();
                    if chars.len() != 6 || chars.iter().any(|c| *c != '0' && *c != '1') {
                        return Err(Error::parse(
                            line_no,
                            "constraint mask must be six 0/1 digits",
                        ));
                    }
                    let mut mask = [false; 6];
                    for i in 0..6 {
                        mask[i] = chars[i] == '1';
                    }
                    model.fix(node, mask);
                }
                "probes" => {
                    expect(2)?;
                    let node = index(1)?;
                    if model.probes.insert(fields[0].to_string(), node).is_some() {
                        return Err(Error::parse(
                            line_no,
                            format!("probe `{}` defined twice", fields[0]),
                        ));
                    }
                }
                _ => return Err(Error::parse(line_no, "data outside of a section")),
            }
        }
        Ok(model)
    }
}

/// Rotation whose rows are the element's local axes in global coordinates.
pub fn element_frame(a: [f64; 3], b: [f64; 3], hint: [f64; 3]) -> Result<Matrix3<f64>> {
    let d = Vector3::from(b) - Vector3::from(a);
    let len = d.norm();
    if !(len > 1e-12) {
        return Err(Error::domain("zero-length element"));
    }
    let ex = d / len;
    let mut h = Vector3::from(hint);
    let hn = h.norm();
    if !(hn > 0.0) || (h.dot(&ex) / hn).abs() > 1f64.to_radians().cos() {
        h = Vector3::z();
        if h.dot(&ex).abs() > 1f64.to_radians().cos() {
            h = Vector3::y();
        }
    }
    let ey = (h - ex * h.dot(&ex)).normalize();
    let ez = ex.cross(&ey);
    Ok(Matrix3::from_rows(&[
        ex.transpose(),
        ey.transpose(),
        ez.transpose(),
    ]))
}

/// Element stiffness in local coordinates.
pub fn local_stiffness(e: &Element, length: f64) -> Matrix12 {
    let l = length;
    let em = e.material.young_modulus;
    let mut k = Matrix12::zeros();
    let mut put = |i: usize, j: usize, v: f64| {
        k[(i, j)] = v;
        k[(j, i)] = v;
    };
    let ea = em * e.area / l;
    put(0, 0, ea);
    put(6, 6, ea);
    put(0, 6, -ea);
    let gj = e.material.shear_modulus() * e.torsion_constant / l;
    put(3, 3, gj);
    put(9, 9, gj);
    put(3, 9, -gj);

    // v / rz, bending about local z
    let c = em * e.inertia_z / l.powi(3);
    put(1, 1, 12.0 * c);
    put(1, 5, 6.0 * l * c);
    put(1, 7, -12.0 * c);
    put(1, 11, 6.0 * l * c);
    put(5, 5, 4.0 * l * l * c);
    put(5, 7, -6.0 * l * c);
    put(5, 11, 2.0 * l * l * c);
    put(7, 7, 12.0 * c);
    put(7, 11, -6.0 * l * c);
    put(11, 11, 4.0 * l * l * c);

    // w / ry, bending about local y
    let c = em * e.inertia_y / l.powi(3);
    put(2, 2, 12.0 * c);
    put(2, 4, -6.0 * l * c);
    put(2, 8, -12.0 * c);
    put(2, 10, -6.0 * l * c);
    put(4, 4, 4.0 * l * l * c);
    put(4, 8, 6.0 * l * c);
    put(4, 10, 2.0 * l * l * c);
    put(8, 8, 12.0 * c);
    put(8, 10, 6.0 * l * c);
    put(10, 10, 4.0 * l * l * c);
    k
}

fn transformation(r: &Matrix3<f64>) -> Matrix12 {
    let mut t = Matrix12::zeros();
    for blk in 0..4 {
        t.fixed_view_mut::<3, 3>(3 * blk, 3 * blk).copy_from(r);
    }
    t
}

/// Global-coordinate stiffness of one element of `model`.
pub fn element_stiffness(model: &FrameModel, e: &Element) -> Result<Matrix12> {
    let a = model.nodes[e.node_a];
    let b = model.nodes[e.node_b];
    let r = element_frame(a, b, e.local_axis_hint)?;
    let len = (Vector3::from(b) - Vector3::from(a)).norm();
    let t = transformation(&r);
    let kg = t.transpose() * local_stiffness(e, len) * t;
    // symmetrize away rounding from the triple product
    Ok((kg + kg.transpose()) * 0.5)
}

pub fn assemble_global(model: &FrameModel) -> Result<DMatrix<f64>> {
    let n = model.dof_count();
    let mut k = DMatrix::zeros(n, n);
    for e in &model.elements {
        let ke = element_stiffness(model, e)?;
        let map: [usize; 12] = std::array::from_fn(|i| {
            if i < 6 {
                6 * e.node_a + i
            } else {
                6 * e.node_b + i - 6
            }
        });
        for i in 0..12 {
            for j in 0..12 {
                k[(map[i], map[j])] += ke[(i, j)];
            }
        }
    }
    Ok(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementStress {
    /// Largest extreme-fiber normal stress over both ends, MPa.
    pub normal: f64,
    /// Largest torsional shear over both ends, MPa.
    pub shear: f64,
    pub von_mises: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reaction {
    pub node: usize,
    pub dof: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticSolution {
    pub displacements: Vec<[f64; 6]>,
    pub reactions: Vec<Reaction>,
    /// Over stress-checked elements, MPa.
    pub peak_stress: f64,
    /// Over stress-checked elements, MPa.
    pub peak_von_mises: f64,
    pub element_stress: Vec<ElementStress>,
    /// `‖K_ff u_f − f_f‖ / ‖f‖` (0 for an unloaded model).
    pub relative_residual: f64,
}

impl StaticSolution {
    pub fn translation(&self, node: usize) -> Vector3<f64> {
        let d = self.displacements[node];
        Vector3::new(d[0], d[1], d[2])
    }
}

/// A model with its reduced stiffness factorized once, for many load cases.
#[derive(Debug, Clone)]
pub struct FrameAnalysis {
    model: FrameModel,
    k_full: DMatrix<f64>,
    k_ff: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    free: Vec<usize>,
    fixed: Vec<usize>,
    element_data: Vec<(Matrix12, Matrix12, f64)>,
}

impl FrameAnalysis {
    pub fn new(model: &FrameModel) -> Result<Self> {
        model.validate()?;
        let k_full = assemble_global(model)?;
        let n = model.dof_count();
        let is_fixed = |d: usize| {
            model
                .constraints
                .get(&(d / 6))
                .map(|m| m[d % 6])
                .unwrap_or(false)
        };
        let free: Vec<usize> = (0..n).filter(|d| !is_fixed(*d)).collect();
        let fixed: Vec<usize> = (0..n).filter(|d| is_fixed(*d)).collect();
        let k_ff = k_full.select_rows(&free).select_columns(&free);
        let chol = nalgebra::Cholesky::new(k_ff.clone())
            .ok_or_else(|| Error::Mechanism("reduced stiffness is not positive definite".into()))?;
        let l = chol.l_dirty();
        let max_diag = (0..free.len()).map(|i| k_ff[(i, i)]).fold(0.0, f64::max);
        let min_pivot = (0..free.len())
            .map(|i| l[(i, i)] * l[(i, i)])
            .fold(f64::INFINITY, f64::min);
        if !free.is_empty() && !(min_pivot > 1e-13 * max_diag) {
            return Err(Error::Mechanism(format!(
                "pivot ratio {:e} indicates a rigid-body mode",
                min_pivot / max_diag
            )));
        }
        let mut element_data = Vec::with_capacity(model.elements.len());
        for e in &model.elements {
            let a = model.nodes[e.node_a];
            let b = model.nodes[e.node_b];
            let len = (Vector3::from(b) - Vector3::from(a)).norm();
            let t = transformation(&element_frame(a, b, e.local_axis_hint)?);
            element_data.push((local_stiffness(e, len), t, len));
        }
        Ok(FrameAnalysis {
            model: model.clone(),
            k_full,
            k_ff,
            chol,
            free,
            fixed,
            element_data,
        })
    }

    pub fn model(&self) -> &FrameModel {
        &self.model
    }

    pub fn solve(&self, loads: &[NodalLoad]) -> Result<StaticSolution> {
        let n = self.model.dof_count();
        let mut f = DVector::zeros(n);
        for load in loads {
            if load.node >= self.model.nodes.len() {
                return Err(Error::Model(format!("load on missing node {}", load.node)));
            }
            if load.force.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical("non-finite load".into()));
            }
            for i in 0..6 {
                f[6 * load.node + i] += load.force[i];
            }
        }
        let f_free = f.select_rows(&self.free);
        let u_free = self.chol.solve(&f_free);
        if u_free.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite displacement".into()));
        }
        let f_norm = f.norm();
        let residual = (&self.k_ff * &u_free - &f_free).norm();
        let relative_residual = if f_norm > 0.0 {
            residual / f_norm
        } else {
            residual
        };
        if relative_residual > 1e-8 {
            return Err(Error::Numerical(format!(
                "equilibrium residual {relative_residual:e} exceeds 1e-8"
            )));
        }
        let mut u = DVector::zeros(n);
        for (k, d) in self.free.iter().enumerate() {
            u[*d] = u_free[k];
        }
        let r = &self.k_full * &u - &f;
        let reactions = self
            .fixed
            .iter()
            .map(|d| Reaction {
                node: d / 6,
                dof: d % 6,
                value: r[*d],
            })
            .collect();

        let mut element_stress = Vec::with_capacity(self.model.elements.len());
        let (mut peak_stress, mut peak_von_mises) = (0.0_f64, 0.0_f64);
        for (e, (kl, t, _)) in self.model.elements.iter().zip(&self.element_data) {
            let ue = SMatrix::<f64, 12, 1>::from_fn(|i, _| {
                if i < 6 {
                    u[6 * e.node_a + i]
                } else {
                    u[6 * e.node_b + i - 6]
                }
            });
            let fl = kl * (t * ue);
            let mut st = ElementStress {
                normal: 0.0,
                shear: 0.0,
                von_mises: 0.0,
            };
            for end in [0, 6] {
                let (axial, torque, my, mz) = (fl[end], fl[end + 3], fl[end + 4], fl[end + 5]);
                let sigma = axial.abs() / e.area
                    + my.abs() * (e.section_thickness / 2.0) / e.inertia_y
                    + mz.abs() * (e.section_height / 2.0) / e.inertia_z;
                let tau =
                    torque.abs() * e.section_thickness.min(e.section_height) / e.torsion_constant;
                let vm = (sigma * sigma + 3.0 * tau * tau).sqrt();
                st.normal = st.normal.max(sigma);
                st.shear = st.shear.max(tau);
                st.von_mises = st.von_mises.max(vm);
            }
            if e.stress_checked {
                peak_stress = peak_stress.max(st.normal);
                peak_von_mises = peak_von_mises.max(st.von_mises);
            }
            element_stress.push(st);
        }

        let displacements = (0..self.model.nodes.len())
            .map(|i| std::array::from_fn(|k| u[6 * i + k]))
            .collect();
        Ok(StaticSolution {
            displacements,
            reactions,
            peak_stress,
            peak_von_mises,
            element_stress,
            relative_residual,
        })
    }

    /// Stiffness seen at `dofs` of `node` with all other DOFs load-free:
    /// the inverse of the corresponding compliance block.
    pub fn condensed_stiffness(&self, node: usize, dofs: &[usize]) -> Result<DMatrix<f64>> {
        let m = dofs.len();
        let mut c = DMatrix::zeros(m, m);
        for (j, dj) in dofs.iter().enumerate() {
            let mut force = [0.0; 6];
            force[*dj] = 1.0;
            let sol = self.solve(&[NodalLoad { node, force }])?;
            for (i, di) in dofs.iter().enumerate() {
                c[(i, j)] = sol.displacements[node][*di];
            }
        }
        let c = (&c + c.transpose()) * 0.5;
        c.try_inverse()
            .ok_or_else(|| Error::Numerical("condensed compliance is singular".into()))
    }
}

/// Factorizes and solves a single load set.
pub fn solve_static(model: &FrameModel, loads: &[NodalLoad]) -> Result<StaticSolution> {
    FrameAnalysis::new(model)?.solve(loads)
}
