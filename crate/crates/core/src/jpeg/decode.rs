use super::bits::BitReader;
use super::huffman::{extend, Decoder};
use super::tables::{HuffmanSpec, ZIGZAG_TO_NATURAL};
use super::{QuantTable, QuantizedJpeg};
use crate::error::{Error, Result};

struct FrameComponent {
    id: u8,
    h: u8,
    v: u8,
    table_id: u8,
}

struct Frame {
    width: u32,
    height: u32,
    components: Vec<FrameComponent>,
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: &str) -> Error {
        Error::Parse { offset: self.pos, message: message.to_string() }
    }

    fn u8(&mut self) -> Result<u8> {
        let b = *self.data.get(self.pos).ok_or_else(|| self.err("unexpected end of stream"))?;
        self.pos += 1;
        Ok(b)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from(self.u8()?) << 8 | u16::from(self.u8()?))
    }

    /// Returns the payload of a length-prefixed segment.
    fn segment(&mut self) -> Result<&'a [u8]> {
        let start = self.pos;
        let len = self.u16()? as usize;
        if len < 2 {
            self.pos = start;
            return Err(self.err("segment length below 2"));
        }
        let end = start + len;
        if end > self.data.len() {
            self.pos = self.data.len();
            return Err(self.err("segment runs past end of stream"));
        }
        self.pos = end;
        Ok(&self.data[start + 2..end])
    }

    /// Advances to the next marker and returns its code.
    fn next_marker(&mut self) -> Result<u8> {
        loop {
            let b = self.u8()?;
            if b != 0xFF {
                continue;
            }
            let mut m = self.u8()?;
            while m == 0xFF {
                m = self.u8()?;
            }
            if m != 0x00 && !(0xD0..=0xD7).contains(&m) {
                return Ok(m);
            }
        }
    }
}

fn seg_err(base: usize, message: &str) -> Error {
    Error::Parse { offset: base, message: message.to_string() }
}

fn parse_dqt(payload: &[u8], base: usize, tables: &mut [Option<QuantTable>; 4]) -> Result<()> {
    let mut i = 0;
    while i < payload.len() {
        let pq = payload[i] >> 4;
        let tq = (payload[i] & 15) as usize;
        i += 1;
        if pq != 0 {
            return Err(Error::UnsupportedFormat("16-bit quantization tables".into()));
        }
        if tq > 3 {
            return Err(seg_err(base + i, "quantization table id above 3"));
        }
        let raw = payload.get(i..i + 64).ok_or_else(|| seg_err(base + i, "short DQT segment"))?;
        let mut zz = [0u16; 64];
        for (slot, &b) in zz.iter_mut().zip(raw) {
            *slot = u16::from(b);
        }
        tables[tq] = Some(QuantTable::from_zigzag(zz).map_err(|_| seg_err(base + i, "zero quantization step"))?);
        i += 64;
    }
    Ok(())
}

fn parse_dht(payload: &[u8], base: usize, dc: &mut [Option<Decoder>; 4], ac: &mut [Option<Decoder>; 4]) -> Result<()> {
    let mut i = 0;
    while i < payload.len() {
        let class = payload[i] >> 4;
        let id = (payload[i] & 15) as usize;
        if class > 1 || id > 3 {
            return Err(seg_err(base + i, "bad Huffman table class or id"));
        }
        i += 1;
        let counts: [u8; 16] = payload
            .get(i..i + 16)
            .ok_or_else(|| seg_err(base + i, "short DHT segment"))?
            .try_into()
            .expect("16-byte slice");
        i += 16;
        let n: usize = counts.iter().map(|&c| c as usize).sum();
        let symbols = payload.get(i..i + n).ok_or_else(|| seg_err(base + i, "short DHT segment"))?.to_vec();
        i += n;
        let decoder = Decoder::new(&HuffmanSpec { counts, symbols })?;
        if class == 0 {
            dc[id] = Some(decoder);
        } else {
            ac[id] = Some(decoder);
        }
    }
    Ok(())
}

fn parse_sof(payload: &[u8], base: usize) -> Result<Frame> {
    if payload.len() < 6 {
        return Err(seg_err(base, "short SOF segment"));
    }
    if payload[0] != 8 {
        return Err(Error::UnsupportedFormat(format!("{}-bit sample precision", payload[0])));
    }
    let height = u32::from(u16::from_be_bytes([payload[1], payload[2]]));
    let width = u32::from(u16::from_be_bytes([payload[3], payload[4]]));
    let n = payload[5] as usize;
    if height == 0 {
        return Err(Error::UnsupportedFormat("height defined by DNL marker".into()));
    }
    if width == 0 || n == 0 || n > 4 || payload.len() < 6 + 3 * n {
        return Err(seg_err(base, "invalid frame header"));
    }
    let components = (0..n)
        .map(|c| {
            let p = &payload[6 + 3 * c..9 + 3 * c];
            FrameComponent { id: p[0], h: p[1] >> 4, v: p[1] & 15, table_id: p[2] & 3 }
        })
        .collect::<Vec<_>>();
    if components.iter().any(|c| !(1..=4).contains(&c.h) || !(1..=4).contains(&c.v)) {
        return Err(seg_err(base, "invalid sampling factors"));
    }
    Ok(Frame { width, height, components })
}

struct ScanComponent {
    index: usize,
    dc: usize,
    ac: usize,
}

fn decode_block(
    r: &mut BitReader<'_>,
    dc: &Decoder,
    ac: &Decoder,
    pred: &mut i32,
    block: &mut [i16; 64],
) -> Result<()> {
    let t = u32::from(dc.decode(r)?);
    if t > 11 {
        return Err(Error::Parse { offset: r.position(), message: "DC category above 11".into() });
    }
    *pred += extend(r.bits(t)?, t);
    block[0] = *pred as i16;
    let mut k = 1;
    while k < 64 {
        let rs = ac.decode(r)?;
        let run = usize::from(rs >> 4);
        let size = u32::from(rs & 15);
        if size == 0 {
            if run == 15 {
                k += 16;
                continue;
            }
            break;
        }
        k += run;
        if k > 63 {
            return Err(Error::Parse { offset: r.position(), message: "AC run past end of block".into() });
        }
        block[ZIGZAG_TO_NATURAL[k]] = extend(r.bits(size)?, size) as i16;
        k += 1;
    }
    Ok(())
}

/// Parses a baseline sequential Huffman-coded JPEG.
///
/// Coefficients are returned exactly as stored (no dequantization) and
/// converted from zig-zag to natural order.
pub fn parse_jpeg(data: &[u8]) -> Result<QuantizedJpeg> {
    let mut cur = Cursor { data, pos: 0 };
    if cur.u8()? != 0xFF || cur.u8()? != 0xD8 {
        return Err(Error::Parse { offset: 0, message: "missing SOI marker".into() });
    }
    let mut qt: [Option<QuantTable>; 4] = [None; 4];
    let mut dc: [Option<Decoder>; 4] = Default::default();
    let mut ac: [Option<Decoder>; 4] = Default::default();
    let mut frame: Option<Frame> = None;
    let mut image: Option<QuantizedJpeg> = None;
    let mut restart_interval = 0usize;

    loop {
        let marker = cur.next_marker()?;
        let base = cur.pos;
        match marker {
            0xD8 => return Err(cur.err("unexpected SOI")),
            0xD9 => break,
            0xC0 | 0xC1 => {
                if frame.is_some() {
                    return Err(cur.err("multiple frames"));
                }
                let payload = cur.segment()?;
                frame = Some(parse_sof(payload, base)?);
            }
            0xC2 | 0xC6 | 0xCA | 0xCE => return Err(Error::UnsupportedFormat("progressive JPEG".into())),
            0xC3 | 0xC7 | 0xCB | 0xCF => return Err(Error::UnsupportedFormat("lossless JPEG".into())),
            0xC9 | 0xCD | 0xCC => return Err(Error::UnsupportedFormat("arithmetic coding".into())),
            0xC5 => return Err(Error::UnsupportedFormat("hierarchical JPEG".into())),
            0xC4 => {
                let payload = cur.segment()?;
                parse_dht(payload, base + 2, &mut dc, &mut ac)?;
            }
            0xDB => {
                let payload = cur.segment()?;
                parse_dqt(payload, base + 2, &mut qt)?;
            }
            0xDD => {
                let payload = cur.segment()?;
                if payload.len() < 2 {
                    return Err(seg_err(base, "short DRI segment"));
                }
                restart_interval = usize::from(u16::from_be_bytes([payload[0], payload[1]]));
            }
            0xDA => {
                let payload = cur.segment()?;
                let f = frame.as_ref().ok_or_else(|| seg_err(base, "scan before frame header"))?;
                if image.is_none() {
                    let mut comps = Vec::with_capacity(f.components.len());
                    for c in &f.components {
                        let table = qt[c.table_id as usize]
                            .ok_or_else(|| seg_err(base, "component references an undefined quantization table"))?;
                        comps.push((c.id, c.h, c.v, table));
                    }
                    image = Some(QuantizedJpeg::new(f.width, f.height, &comps)?);
                }
                let img = image.as_mut().expect("initialised above");
                let n = *payload.first().ok_or_else(|| seg_err(base, "empty SOS"))? as usize;
                if n == 0 || n > 4 || payload.len() < 1 + 2 * n + 3 {
                    return Err(seg_err(base, "invalid scan header"));
                }
                let mut scan = Vec::with_capacity(n);
                for s in 0..n {
                    let id = payload[1 + 2 * s];
                    let tables = payload[2 + 2 * s];
                    let index = f
                        .components
                        .iter()
                        .position(|c| c.id == id)
                        .ok_or_else(|| seg_err(base, "scan references an unknown component"))?;
                    scan.push(ScanComponent { index, dc: (tables >> 4) as usize & 3, ac: (tables & 15) as usize & 3 });
                }
                let (ss, se, a) = (payload[1 + 2 * n], payload[2 + 2 * n], payload[3 + 2 * n]);
                if ss != 0 || se != 63 || a != 0 {
                    return Err(Error::UnsupportedFormat("spectral selection or successive approximation".into()));
                }
                for s in &scan {
                    if dc[s.dc].is_none() || ac[s.ac].is_none() {
                        return Err(seg_err(base, "scan references an undefined Huffman table"));
                    }
                }
                cur.pos = decode_scan(data, cur.pos, img, &scan, &dc, &ac, restart_interval)?;
            }
            0xD0..=0xD7 | 0x01 => {}
            _ => {
                cur.segment()?;
            }
        }
    }
    image.ok_or_else(|| Error::Parse { offset: cur.pos, message: "no scan data".into() })
}

fn decode_scan(
    data: &[u8],
    pos: usize,
    img: &mut QuantizedJpeg,
    scan: &[ScanComponent],
    dc: &[Option<Decoder>; 4],
    ac: &[Option<Decoder>; 4],
    restart_interval: usize,
) -> Result<usize> {
    let mut r = BitReader::new(data, pos);
    let mut preds = vec![0i32; scan.len()];
    let mut mcu_count = 0usize;
    let mut next_rst = 0u8;

    let mut restart = |r: &mut BitReader<'_>, preds: &mut [i32], mcu_count: usize| -> Result<()> {
        if restart_interval > 0 && mcu_count > 0 && mcu_count.is_multiple_of(restart_interval) {
            r.restart(next_rst)?;
            next_rst = (next_rst + 1) & 7;
            preds.iter_mut().for_each(|p| *p = 0);
        }
        Ok(())
    };

    if scan.len() == 1 {
        let s = &scan[0];
        let (dcd, acd) = (dc[s.dc].as_ref().unwrap(), ac[s.ac].as_ref().unwrap());
        let comp = &mut img.components_mut()[s.index];
        for by in 0..comp.blocks_tall() {
            for bx in 0..comp.blocks_wide() {
                restart(&mut r, &mut preds, mcu_count)?;
                decode_block(&mut r, dcd, acd, &mut preds[0], comp.block_mut(bx, by))?;
                mcu_count += 1;
            }
        }
    } else {
        let (h_max, v_max) = img.max_sampling();
        let mcus_x = (img.width() as usize).div_ceil(8 * h_max as usize);
        let mcus_y = (img.height() as usize).div_ceil(8 * v_max as usize);
        for my in 0..mcus_y {
            for mx in 0..mcus_x {
                restart(&mut r, &mut preds, mcu_count)?;
                for (si, s) in scan.iter().enumerate() {
                    let (dcd, acd) = (dc[s.dc].as_ref().unwrap(), ac[s.ac].as_ref().unwrap());
                    let comp = &mut img.components_mut()[s.index];
                    let (h, v) = (comp.h_samp as usize, comp.v_samp as usize);
                    for dy in 0..v {
                        for dx in 0..h {
                            let (bx, by) = (mx * h + dx, my * v + dy);
                            if bx < comp.blocks_wide() && by < comp.blocks_tall() {
                                decode_block(&mut r, dcd, acd, &mut preds[si], comp.block_mut(bx, by))?;
                            } else {
                                let mut scratch = [0i16; 64];
                                decode_block(&mut r, dcd, acd, &mut preds[si], &mut scratch)?;
                            }
                        }
                    }
                }
                mcu_count += 1;
            }
        }
    }
    Ok(r.position())
}
