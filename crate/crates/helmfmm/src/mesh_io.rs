//! GMSH 2.2 ASCII input and the block-readable binary mesh format.
//!
//! The binary layout is a 32-byte header (8-byte magic, then version,
//! element count and points per element as big-endian `u64`) followed by one
//! 144-byte record per element: 6 points × 3 big-endian `f64`. Fixed-size
//! records let every rank seek straight to its block.

use std::collections::HashMap;
use std::io::{BufRead, Read, Seek, SeekFrom, Write};

use helmfmm_core::mesh::{ElementRecord, SurfaceMesh};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"HFMMESH\0";
pub const VERSION: u64 = 1;
pub const POINTS_PER_ELEMENT: u64 = 6;
pub const HEADER_BYTES: u64 = 32;
pub const RECORD_BYTES: u64 = 6 * 3 * 8;
/// GMSH element type of the 6-node second-order triangle.
pub const GMSH_TRIANGLE6: u32 = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BinaryMeshHeader {
    pub magic: [u8; 8],
    pub version: u64,
    pub element_count: u64,
    pub points_per_element: u64,
}

/// A parsed mesh and the number of elements that were not 6-node triangles.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedMesh {
    pub mesh: SurfaceMesh,
    pub skipped: usize,
}

struct Lines<R> {
    inner: R,
    line: usize,
    buf: String,
}

impl<R: BufRead> Lines<R> {
    /// Next non-blank line, trimmed; `None` at end of input.
    fn next(&mut self) -> Result<Option<&str>> {
        loop {
            self.buf.clear();
            if self.inner.read_line(&mut self.buf)? == 0 {
                return Ok(None);
            }
            self.line += 1;
            if !self.buf.trim().is_empty() {
                return Ok(Some(self.buf.trim()));
            }
        }
    }

    fn expect(&mut self, what: &str) -> Result<String> {
        let line = self.line + 1;
        match self.next()? {
            Some(s) => Ok(s.to_string()),
            None => Err(Error::Parse {
                line,
                message: format!("unexpected end of file, expected {what}"),
            }),
        }
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            line: self.line,
            message: message.into(),
        })
    }
}

fn fields<T: std::str::FromStr>(lines: &Lines<impl BufRead>, s: &str, min: usize) -> Result<Vec<T>> {
    let out: std::result::Result<Vec<T>, _> = s.split_whitespace().map(str::parse).collect();
    match out {
        Ok(v) if v.len() >= min => Ok(v),
        _ => lines.fail(format!("malformed record `{s}`")),
    }
}

/// Read an MSH 2.2 ASCII stream, keeping the type-9 triangles.
pub fn parse_gmsh(reader: impl BufRead) -> Result<ParsedMesh> {
    let mut lines = Lines {
        inner: reader,
        line: 0,
        buf: String::new(),
    };
    let mut nodes: HashMap<u64, [f64; 3]> = HashMap::new();
    let mut raw_elements: Vec<(usize, [u64; 6])> = Vec::new();
    let mut skipped = 0;
    let (mut seen_nodes, mut seen_elements) = (false, false);
    while let Some(header) = lines.next()? {
        let header = header.to_string();
        match header.as_str() {
            "$MeshFormat" => {
                let format_line = lines.expect("format line")?;
                let f: Vec<&str> = format_line.split_whitespace().collect();
                if f.len() < 3 || !f[0].starts_with("2.") || f[1] != "0" {
                    return lines.fail(format!("unsupported mesh format `{format_line}`, need ASCII 2.x"));
                }
                if lines.expect("$EndMeshFormat")? != "$EndMeshFormat" {
                    return lines.fail("expected $EndMeshFormat");
                }
            }
            "$Nodes" => {
                let count = lines.expect("node count")?;
                let n: usize = fields::<usize>(&lines, &count, 1)?[0];
                for _ in 0..n {
                    let rec = lines.expect("node record")?;
                    let v: Vec<f64> = fields(&lines, &rec, 4)?;
                    let id = rec.split_whitespace().next().unwrap().parse::<u64>();
                    let Ok(id) = id else { return lines.fail(format!("bad node id in `{rec}`")) };
                    if !(v[1].is_finite() && v[2].is_finite() && v[3].is_finite()) {
                        return lines.fail("non-finite node coordinate");
                    }
                    nodes.insert(id, [v[1], v[2], v[3]]);
                }
                if lines.expect("$EndNodes")? != "$EndNodes" {
                    return lines.fail("expected $EndNodes");
                }
                seen_nodes = true;
            }
            "$Elements" => {
                let count = lines.expect("element count")?;
                let n: usize = fields::<usize>(&lines, &count, 1)?[0];
                for _ in 0..n {
                    let rec = lines.expect("element record")?;
                    let v: Vec<u64> = fields(&lines, &rec, 3)?;
                    let (etype, ntags) = (v[1], v[2] as usize);
                    if etype != GMSH_TRIANGLE6 as u64 {
                        skipped += 1;
                        continue;
                    }
                    if v.len() != 3 + ntags + 6 {
                        return lines.fail(format!("triangle record `{rec}` does not list 6 nodes"));
                    }
                    let mut ids = [0u64; 6];
                    ids.copy_from_slice(&v[3 + ntags..]);
                    raw_elements.push((lines.line, ids));
                }
                if lines.expect("$EndElements")? != "$EndElements" {
                    return lines.fail("expected $EndElements");
                }
                seen_elements = true;
            }
            s if s.starts_with("$End") => return lines.fail(format!("unmatched section end `{s}`")),
            s if s.starts_with('$') => {
                let end = format!("$End{}", &s[1..]);
                loop {
                    match lines.next()? {
                        Some(l) if l == end => break,
                        Some(_) => {}
                        None => return lines.fail(format!("section `{s}` is not closed")),
                    }
                }
            }
            s => return lines.fail(format!("expected a section header, found `{s}`")),
        }
    }
    if !seen_nodes || !seen_elements {
        return Err(Error::Parse {
            line: lines.line,
            message: "missing $Nodes or $Elements section".into(),
        });
    }
    let mut elements: Vec<ElementRecord> = Vec::with_capacity(raw_elements.len());
    for (line, ids) in raw_elements {
        let mut rec = [[0.0; 3]; 6];
        for (slot, id) in rec.iter_mut().zip(ids) {
            *slot = *nodes
                .get(&id)
                .ok_or_else(|| Error::Structural(format!("element on line {line} references unknown node {id}")))?;
        }
        elements.push(rec);
    }
    if elements.is_empty() {
        return Err(Error::EmptyMesh);
    }
    Ok(ParsedMesh {
        mesh: SurfaceMesh::new(elements)?,
        skipped,
    })
}

/// Write `mesh` as MSH 2.2 ASCII with six private nodes per element.
pub fn write_gmsh(mesh: &SurfaceMesh, mut w: impl Write) -> Result<()> {
    writeln!(w, "$MeshFormat\n2.2 0 8\n$EndMeshFormat")?;
    writeln!(w, "$Nodes\n{}", 6 * mesh.len())?;
    for (e, rec) in mesh.elements.iter().enumerate() {
        for (j, p) in rec.iter().enumerate() {
            writeln!(w, "{} {:e} {:e} {:e}", 6 * e + j + 1, p[0], p[1], p[2])?;
        }
    }
    writeln!(w, "$EndNodes\n$Elements\n{}", mesh.len())?;
    for e in 0..mesh.len() {
        let ids: Vec<String> = (1..=6).map(|j| (6 * e + j).to_string()).collect();
        writeln!(w, "{} 9 2 1 1 {}", e + 1, ids.join(" "))?;
    }
    writeln!(w, "$EndElements")?;
    Ok(())
}

/// Write the binary form of `mesh`; returns the number of bytes written.
pub fn write_binary(mesh: &SurfaceMesh, mut w: impl Write) -> Result<u64> {
    mesh.validate()?;
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_be_bytes())?;
    w.write_all(&(mesh.len() as u64).to_be_bytes())?;
    w.write_all(&POINTS_PER_ELEMENT.to_be_bytes())?;
    let mut rec = [0u8; RECORD_BYTES as usize];
    for e in &mesh.elements {
        for (i, c) in e.iter().flatten().enumerate() {
            rec[8 * i..8 * i + 8].copy_from_slice(&c.to_be_bytes());
        }
        w.write_all(&rec)?;
    }
    w.flush()?;
    Ok(HEADER_BYTES + RECORD_BYTES * mesh.len() as u64)
}

pub fn read_header(mut r: impl Read) -> Result<BinaryMeshHeader> {
    let mut buf = [0u8; HEADER_BYTES as usize];
    r.read_exact(&mut buf)?;
    let word = |i: usize| u64::from_be_bytes(buf[i..i + 8].try_into().unwrap());
    let header = BinaryMeshHeader {
        magic: buf[..8].try_into().unwrap(),
        version: word(8),
        element_count: word(16),
        points_per_element: word(24),
    };
    if header.magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    if header.version != VERSION {
        return Err(Error::Format(format!("unsupported version {}", header.version)));
    }
    if header.points_per_element != POINTS_PER_ELEMENT {
        return Err(Error::Format(format!("{} points per element", header.points_per_element)));
    }
    Ok(header)
}

/// Element index range `[⌊rank·E/n⌋, ⌊(rank+1)·E/n⌋)` of one rank.
pub fn block_range(elements: u64, rank: usize, nranks: usize) -> Result<std::ops::Range<u64>> {
    if nranks == 0 || rank >= nranks {
        return Err(Error::Precondition(format!("rank {rank} of {nranks}")));
    }
    let at = |r: usize| ((r as u128 * elements as u128) / nranks as u128) as u64;
    Ok(at(rank)..at(rank + 1))
}

/// Read the block of elements owned by `rank` out of `nranks`.
///
/// A block may be empty when there are more ranks than elements.
pub fn read_block(mut r: impl Read + Seek, rank: usize, nranks: usize) -> Result<SurfaceMesh> {
    r.seek(SeekFrom::Start(0))?;
    let header = read_header(&mut r)?;
    let range = block_range(header.element_count, rank, nranks)?;
    r.seek(SeekFrom::Start(HEADER_BYTES + RECORD_BYTES * range.start))?;
    let mut rec = [0u8; RECORD_BYTES as usize];
    let mut elements = Vec::with_capacity((range.end - range.start) as usize);
    for _ in range {
        r.read_exact(&mut rec)?;
        let mut e: ElementRecord = [[0.0; 3]; 6];
        for (i, c) in e.iter_mut().flatten().enumerate() {
            *c = f64::from_be_bytes(rec[8 * i..8 * i + 8].try_into().unwrap());
        }
        elements.push(e);
    }
    Ok(SurfaceMesh { elements })
}

/// Load a mesh from a GMSH or binary file, chosen by content.
pub fn load_mesh(path: &std::path::Path) -> Result<SurfaceMesh> {
    let mut f = std::fs::File::open(path)?;
    let mut magic = [0u8; 8];
    let n = f.read(&mut magic)?;
    if n == 8 && magic == MAGIC {
        let mesh = read_block(f, 0, 1)?;
        mesh.validate()?;
        return Ok(mesh);
    }
    f.seek(SeekFrom::Start(0))?;
    Ok(parse_gmsh(std::io::BufReader::new(f))?.mesh)
}
